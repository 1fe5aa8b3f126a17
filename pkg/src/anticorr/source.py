"""Photon-pair source: seeded Poisson streams of two-colour wave packets."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.special import ndtri

#: Gaussian envelopes are treated as zero outside +/- this many sigmas, both
#: for timestamp draws and for overlap accounting (captures >99.99% of the
#: intensity).
GAUSSIAN_SUPPORT_SIGMAS = 4.0


@dataclass(frozen=True)
class EnvelopeSpec:
    """Temporal intensity envelope of one wave packet, centred on its emission time.

    ``duration_or_sigma`` is the full duration of a ``rectangular`` envelope or
    the standard deviation of a ``gaussian`` one.  The intensity profile
    integrates to ``amplitude_scale ** 2`` times the shape normalization
    (the duration, respectively ``sigma * sqrt(2 * pi)``).
    """

    shape: Literal["gaussian", "rectangular"]
    duration_or_sigma: float
    amplitude_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.shape not in ("gaussian", "rectangular"):
            raise ValueError(f"unknown envelope shape {self.shape!r}")
        if not (math.isfinite(self.duration_or_sigma) and self.duration_or_sigma > 0):
            raise ValueError("envelope duration_or_sigma must be positive and finite")
        if not (math.isfinite(self.amplitude_scale) and self.amplitude_scale > 0):
            raise ValueError("envelope amplitude_scale must be positive and finite")

    @property
    def support(self) -> float:
        """Half-width used for overlap accounting: 4 sigma, or the full duration."""
        if self.shape == "gaussian":
            return GAUSSIAN_SUPPORT_SIGMAS * self.duration_or_sigma
        return self.duration_or_sigma

    @property
    def max_abs_offset(self) -> float:
        """Largest |offset| a timestamp draw can have from the emission time."""
        if self.shape == "gaussian":
            return GAUSSIAN_SUPPORT_SIGMAS * self.duration_or_sigma
        return 0.5 * self.duration_or_sigma

    def intensity_integral(self) -> float:
        """Total intensity carried by the packet (arbitrary energy units)."""
        amp2 = self.amplitude_scale**2
        if self.shape == "gaussian":
            return amp2 * self.duration_or_sigma * math.sqrt(2.0 * math.pi)
        return amp2 * self.duration_or_sigma

    def offset_variance(self) -> float:
        """Variance of the normalized intensity profile around the emission time."""
        if self.shape == "gaussian":
            return self.duration_or_sigma**2
        return self.duration_or_sigma**2 / 12.0

    def sample_offsets(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` arrival offsets from the normalized intensity profile.

        Gaussian draws are clipped to the declared support so that detection
        timestamps stay inside the guaranteed stream bounds.
        """
        if self.shape == "gaussian":
            bound = self.max_abs_offset
            return np.clip(rng.normal(0.0, self.duration_or_sigma, n), -bound, bound)
        half = 0.5 * self.duration_or_sigma
        return rng.uniform(-half, half, n)

    def offset_quantile(self, q: np.ndarray) -> np.ndarray:
        """Inverse CDF of the intensity profile, clipped to the declared support."""
        q = np.asarray(q, dtype=np.float64)
        if self.shape == "gaussian":
            bound = self.max_abs_offset
            return np.clip(ndtri(q) * self.duration_or_sigma, -bound, bound)
        return (q - 0.5) * self.duration_or_sigma

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "duration_or_sigma": self.duration_or_sigma,
            "amplitude_scale": self.amplitude_scale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EnvelopeSpec:
        return cls(
            shape=data["shape"],
            duration_or_sigma=float(data["duration_or_sigma"]),
            amplitude_scale=float(data.get("amplitude_scale", 1.0)),
        )


DEFAULT_ENVELOPE = EnvelopeSpec("gaussian", 1e-9, 1.0)


@dataclass(frozen=True)
class SourceConfig:
    """Emission model of the two-photon source (homogeneous Poisson process)."""

    mean_emission_rate: float
    run_duration: float
    rng_seed: int
    blue: EnvelopeSpec = DEFAULT_ENVELOPE
    green: EnvelopeSpec = DEFAULT_ENVELOPE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean_emission_rate) and self.mean_emission_rate > 0):
            raise ValueError("mean_emission_rate must be positive and finite")
        if not (math.isfinite(self.run_duration) and self.run_duration > 0):
            raise ValueError("run_duration must be positive and finite")
        if self.mean_emission_rate * self.run_duration < 1.0:
            raise ValueError(
                "mean_emission_rate * run_duration must be at least 1 "
                "(run would be empty in expectation)"
            )
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")

    @property
    def max_support(self) -> float:
        return max(self.blue.support, self.green.support)

    def to_dict(self) -> dict:
        return {
            "mean_emission_rate": self.mean_emission_rate,
            "run_duration": self.run_duration,
            "rng_seed": int(self.rng_seed),
            "blue": self.blue.to_dict(),
            "green": self.green.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SourceConfig:
        return cls(
            mean_emission_rate=float(data["mean_emission_rate"]),
            run_duration=float(data["run_duration"]),
            rng_seed=int(data["rng_seed"]),
            blue=EnvelopeSpec.from_dict(data["blue"]),
            green=EnvelopeSpec.from_dict(data["green"]),
        )


@dataclass(frozen=True)
class WavePacketPair:
    """One cascade emission: simultaneous blue and green packets."""

    emission_time: float
    blue: EnvelopeSpec
    green: EnvelopeSpec
    pair_id: int


class EmissionSequence(Sequence):
    """Sequence of wave-packet pairs sharing one envelope pair per run.

    Emission times live in a single sorted float64 array, which keeps the
    detector lanes vectorizable; indexing materializes WavePacketPair values on
    demand.  pair_ids are the positions in the time-sorted array, so they
    increase strictly with emission time.
    """

    __slots__ = ("emission_times", "blue", "green", "source_config")

    def __init__(
        self,
        emission_times: np.ndarray,
        blue: EnvelopeSpec,
        green: EnvelopeSpec,
        source_config: SourceConfig | None = None,
    ):
        times = np.asarray(emission_times, dtype=np.float64)
        if times.ndim != 1:
            raise ValueError("emission_times must be one-dimensional")
        if times.size and (np.any(~np.isfinite(times)) or np.any(np.diff(times) < 0)):
            raise ValueError("emission_times must be finite and sorted")
        self.emission_times = times
        self.blue = blue
        self.green = green
        self.source_config = source_config

    def __len__(self) -> int:
        return int(self.emission_times.size)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return EmissionSequence(
                self.emission_times[index], self.blue, self.green, self.source_config
            )
        i = int(index)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(index)
        return WavePacketPair(
            emission_time=float(self.emission_times[i]),
            blue=self.blue,
            green=self.green,
            pair_id=i,
        )

    def __repr__(self) -> str:
        return f"EmissionSequence(n={len(self)}, blue={self.blue.shape}, green={self.green.shape})"


def as_emission_sequence(pairs) -> EmissionSequence:
    """Coerce any sequence of WavePacketPair into the vectorizable form.

    Detection lanes assume run-uniform envelopes, which is what the source
    emits; mixed-envelope sequences are rejected.
    """
    if isinstance(pairs, EmissionSequence):
        return pairs
    items = list(pairs)
    if not items:
        raise ValueError("empty emission sequence")
    blue, green = items[0].blue, items[0].green
    for p in items[1:]:
        if p.blue != blue or p.green != green:
            raise ValueError("detection requires run-uniform envelopes")
    times = np.array([p.emission_time for p in items], dtype=np.float64)
    order = np.argsort(times, kind="stable")
    return EmissionSequence(times[order], blue, green)


def generate_emissions(config: SourceConfig) -> EmissionSequence:
    """Poisson emission stream on [0, run_duration), sorted, reproducible by seed.

    Inter-emission gaps are drawn as i.i.d. exponentials with the configured
    rate and accumulated until the run horizon, so the output is an exact
    homogeneous Poisson process restricted to the run window.
    """
    rng = np.random.default_rng(config.rng_seed)
    rate = config.mean_emission_rate
    horizon = config.run_duration

    mean_count = rate * horizon
    chunk = int(mean_count + 10.0 * math.sqrt(mean_count) + 16.0)
    parts: list[np.ndarray] = []
    t_end = 0.0
    while True:
        arrivals = t_end + np.cumsum(rng.exponential(1.0 / rate, chunk))
        inside = arrivals[arrivals < horizon]
        parts.append(inside)
        if inside.size < arrivals.size:
            break
        t_end = float(arrivals[-1])
        chunk = max(int((horizon - t_end) * rate * 1.5) + 16, 16)
    times = np.concatenate(parts) if len(parts) > 1 else parts[0]
    return EmissionSequence(times, config.blue, config.green, config)


def expected_overlap_probability(config: SourceConfig, alpha: float) -> float:
    """Chance that another emission lands within +/-(2 alpha + support) of a given one.

    Under the Poisson model the number of other emissions inside a window of
    length w = 4 alpha + 2 support around a given emission is Poisson(rate * w),
    so the probability of at least one is 1 - exp(-rate * w).  This is the
    theoretical overlap probability used by the significance gate.
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive and finite")
    window = 4.0 * alpha + 2.0 * config.max_support
    return -math.expm1(-config.mean_emission_rate * window)


def scaled_rate(config: SourceConfig, rate: float) -> SourceConfig:
    """Same source with a different emission rate (rate sweeps)."""
    return replace(config, mean_emission_rate=rate)
