"""Filters, beam splitter, and the two competing detector physics lanes.

Collapse-style detection ("copenhagen") turns each pair into point events: the
blue photon may fire D0, while the green photon routes through the splitter to
exactly one of D1/D2, so D1 and D2 never both respond to the same pair.

Absorber-style detection ("planck") gives every detector a bank of microscopic
absorbers.  Each absorber holds a fill level in [0, 1), integrates its equal
share of the incident intensity at ``fill_gain`` per unit intensity, emits a
detection the instant it saturates, and resets to a fresh uniform level.  The
three banks never communicate, so D1 and D2 act independently and one packet
can yield several dots.

Absorption is processed packet-sequentially: when two packets overlap in time,
a saturation caused while both are incident is timestamped through the profile
of the packet whose fill produced it rather than the superposed intensity.
Counts are unaffected; only timing inside overlap incidents differs, and those
incidents are exactly what the overlap probability p0 accounts for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .source import EmissionSequence, EnvelopeSpec, as_emission_sequence
from .timetag import CHANNEL_NAMES, EventStreams


class PhysicsModel(str, Enum):
    COPENHAGEN = "copenhagen"
    PLANCK = "planck"


class Channel(IntEnum):
    D0 = 0
    D1 = 1
    D2 = 2


@dataclass(frozen=True)
class ApparatusConfig:
    """Optical path and detector parameters shared by both physics lanes.

    ``splitter_transmittance`` is the fraction of green intensity sent to D1;
    the reflected fraction ``1 - transmittance`` goes to D2.  ``signal_latency``
    is the (planck-lane) delay between absorber saturation and the recorded
    signal, zero by default.
    """

    splitter_transmittance: float
    path_delays: tuple[float, float, float] = (0.0, 0.0, 0.0)
    detector_efficiencies: tuple[float, float, float] = (1.0, 1.0, 1.0)
    dead_time: float = 0.0
    physics_model: PhysicsModel = PhysicsModel.COPENHAGEN
    signal_latency: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.splitter_transmittance <= 1.0:
            raise ValueError("splitter_transmittance must lie in [0, 1]")
        if len(self.path_delays) != 3 or any(d < 0 or not math.isfinite(d) for d in self.path_delays):
            raise ValueError("path_delays must be three nonnegative times")
        if len(self.detector_efficiencies) != 3 or any(
            not 0.0 <= e <= 1.0 for e in self.detector_efficiencies
        ):
            raise ValueError("detector_efficiencies must be three probabilities")
        if self.dead_time < 0 or not math.isfinite(self.dead_time):
            raise ValueError("dead_time must be nonnegative")
        if self.signal_latency < 0 or not math.isfinite(self.signal_latency):
            raise ValueError("signal_latency must be nonnegative")
        object.__setattr__(self, "physics_model", PhysicsModel(self.physics_model))
        object.__setattr__(self, "path_delays", tuple(float(d) for d in self.path_delays))
        object.__setattr__(
            self, "detector_efficiencies", tuple(float(e) for e in self.detector_efficiencies)
        )

    @property
    def reflectance(self) -> float:
        return 1.0 - self.splitter_transmittance

    def to_dict(self) -> dict:
        return {
            "splitter_transmittance": self.splitter_transmittance,
            "path_delays": list(self.path_delays),
            "detector_efficiencies": list(self.detector_efficiencies),
            "dead_time": self.dead_time,
            "physics_model": self.physics_model.value,
            "signal_latency": self.signal_latency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ApparatusConfig":
        return cls(
            splitter_transmittance=float(data["splitter_transmittance"]),
            path_delays=tuple(float(x) for x in data.get("path_delays", (0.0, 0.0, 0.0))),
            detector_efficiencies=tuple(
                float(x) for x in data.get("detector_efficiencies", (1.0, 1.0, 1.0))
            ),
            dead_time=float(data.get("dead_time", 0.0)),
            physics_model=PhysicsModel(data.get("physics_model", "copenhagen")),
            signal_latency=float(data.get("signal_latency", 0.0)),
        )


@dataclass
class AbsorberBank:
    """Saturating absorber bank of one detector (planck lane).

    Fill levels live in [0, 1); an absorber signals the instant its level
    reaches 1 and resets to a fresh uniform draw.  Levels persist between
    packets.  ``fill_added`` accumulates the total fill routed into the bank,
    which by construction never exceeds fill_gain times the incident intensity
    integral (absorption attenuates, it does not create energy).
    """

    fill_levels: np.ndarray
    fill_gain: float
    fill_added: float = 0.0

    def __post_init__(self) -> None:
        self.fill_levels = np.asarray(self.fill_levels, dtype=np.float64)
        if self.fill_levels.ndim != 1 or self.fill_levels.size == 0:
            raise ValueError("fill_levels must be a nonempty vector")
        if np.any(self.fill_levels < 0) or np.any(self.fill_levels >= 1):
            raise ValueError("fill levels must lie in [0, 1)")
        if self.fill_gain < 0 or not math.isfinite(self.fill_gain):
            raise ValueError("fill_gain must be nonnegative and finite")

    @property
    def count(self) -> int:
        return int(self.fill_levels.size)

    @classmethod
    def fresh(cls, count: int, fill_gain: float, rng: np.random.Generator) -> "AbsorberBank":
        """Bank with i.i.d. uniform initial fill levels."""
        if count < 1:
            raise ValueError("absorber count must be positive")
        return cls(fill_levels=rng.random(count), fill_gain=fill_gain)


def _finalize_channel(times: np.ndarray) -> np.ndarray:
    """Sort and drop the (rare) draws that fall before the run origin."""
    times = np.sort(times)
    if times.size and times[0] < 0:
        times = times[times >= 0]
    return times


def _run_metadata(seq: EmissionSequence, config: ApparatusConfig, rng_seed: int) -> dict:
    if seq.source_config is not None:
        duration = seq.source_config.run_duration
    elif len(seq):
        duration = float(seq.emission_times[-1])
    else:
        duration = 1.0
    md = {
        "format": {
            "time_unit": "s",
            "time_resolution": float(np.spacing(max(duration, 1.0))),
        },
        "run": {
            "physics_model": config.physics_model.value,
            "detect_seed": int(rng_seed),
            "duration": duration,
            "n_emissions": len(seq),
        },
        "apparatus": config.to_dict(),
    }
    if seq.source_config is not None:
        md["source"] = seq.source_config.to_dict()
    return md


def detect_copenhagen(pairs, config: ApparatusConfig, rng_seed: int) -> EventStreams:
    """Collapse-lane detection: one green event at most, never at both outputs.

    Per pair: D0 fires with the blue efficiency; the green photon routes to D1
    with probability ``transmittance`` (else D2) and registers with that
    detector's efficiency.  Registered timestamps are emission time plus path
    delay plus a draw from the envelope's normalized intensity profile.  Draw
    order is fixed (routing, D0 firing, green firing, blue offsets, green
    offsets), so equal seeds give identical streams.
    """
    if config.physics_model is not PhysicsModel.COPENHAGEN:
        raise ValueError("config.physics_model must be 'copenhagen'")
    seq = as_emission_sequence(pairs)
    te = seq.emission_times
    n = te.size
    eff0, eff1, eff2 = config.detector_efficiencies
    d0_delay, d1_delay, d2_delay = config.path_delays

    rng = np.random.default_rng(rng_seed)
    to_d1 = rng.random(n) < config.splitter_transmittance
    fire0 = rng.random(n) < eff0
    green_eff = np.where(to_d1, eff1, eff2)
    fire_green = rng.random(n) < green_eff
    blue_off = seq.blue.sample_offsets(rng, n)
    green_off = seq.green.sample_offsets(rng, n)

    t0 = te[fire0] + d0_delay + blue_off[fire0]
    green_delay = np.where(to_d1, d1_delay, d2_delay)
    tg = te + green_delay + green_off
    t1 = tg[fire_green & to_d1]
    t2 = tg[fire_green & ~to_d1]

    streams = EventStreams(
        tuple(_finalize_channel(t) for t in (t0, t1, t2)),
        _run_metadata(seq, config, rng_seed),
    )
    return apply_dead_time(streams, config.dead_time)


def _renewal_crossings(
    level: float, total_fill: float, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Fill-axis coordinates in (0, total_fill] where one absorber saturates.

    The first saturation needs ``1 - level`` fill; each subsequent one needs
    ``1 - u`` for a fresh uniform u.  Returns the crossing coordinates and the
    fill level left once ``total_fill`` has been absorbed.
    """
    first = 1.0 - level
    if first > total_fill:
        return np.empty(0), level + total_fill
    parts = [np.array([first])]
    pos = first
    while True:
        need = total_fill - pos
        m = max(int(2.2 * need) + 16, 16)
        cs = pos + np.cumsum(1.0 - rng.random(m))
        n_inside = int(np.searchsorted(cs, total_fill, side="right"))
        if n_inside < m:
            parts.append(cs[:n_inside])
            overshoot = float(cs[n_inside])
            crossings = np.concatenate(parts)
            return crossings, 1.0 - (overshoot - total_fill)
        parts.append(cs)
        pos = float(cs[-1])


def _bank_dots(
    emission_times: np.ndarray,
    envelope: EnvelopeSpec,
    per_absorber_fill: float,
    bank: AbsorberBank,
    rng: np.random.Generator,
) -> np.ndarray:
    """Saturation times of a whole bank over the run, unsorted, no delays."""
    n_packets = emission_times.size
    if per_absorber_fill <= 0.0 or n_packets == 0:
        return np.empty(0)
    total = per_absorber_fill * n_packets
    new_levels = bank.fill_levels.copy()
    parts: list[np.ndarray] = []
    for a in range(bank.count):
        crossings, final_level = _renewal_crossings(float(bank.fill_levels[a]), total, rng)
        new_levels[a] = final_level
        if crossings.size:
            x = crossings / per_absorber_fill  # position in packet units
            idx = np.ceil(x).astype(np.int64) - 1
            np.clip(idx, 0, n_packets - 1, out=idx)
            frac = x - idx
            parts.append(emission_times[idx] + envelope.offset_quantile(frac))
    bank.fill_levels = new_levels
    bank.fill_added += total * bank.count
    return np.concatenate(parts) if parts else np.empty(0)


def detect_planck(
    pairs,
    config: ApparatusConfig,
    banks: tuple[AbsorberBank, AbsorberBank, AbsorberBank],
    rng_seed: int,
) -> EventStreams:
    """Absorber-lane detection: banks integrate intensity and dot on saturation.

    The blue packet's intensity (scaled by the D0 efficiency) is shared equally
    among the D0 absorbers; the green intensity splits transmittance to
    (1 - transmittance) between the D1 and D2 banks, scaled by their
    efficiencies.  Bank states are mutated in place so fill persists across
    calls; each bank consumes its own derived random stream, keeping the three
    detectors statistically independent.
    """
    if config.physics_model is not PhysicsModel.PLANCK:
        raise ValueError("config.physics_model must be 'planck'")
    if len(banks) != 3:
        raise ValueError("detect_planck needs one absorber bank per detector")
    seq = as_emission_sequence(pairs)
    te = seq.emission_times

    eff0, eff1, eff2 = config.detector_efficiencies
    t_split = config.splitter_transmittance
    blue_energy = seq.blue.intensity_integral()
    green_energy = seq.green.intensity_integral()
    incident = (
        eff0 * blue_energy,
        eff1 * t_split * green_energy,
        eff2 * (1.0 - t_split) * green_energy,
    )
    envelopes = (seq.blue, seq.green, seq.green)

    children = np.random.SeedSequence(rng_seed).spawn(3)
    channels = []
    for ch in range(3):
        bank = banks[ch]
        per_absorber = bank.fill_gain * incident[ch] / bank.count
        dots = _bank_dots(te, envelopes[ch], per_absorber, bank, np.random.default_rng(children[ch]))
        dots = dots + config.path_delays[ch] + config.signal_latency
        channels.append(_finalize_channel(dots))

    streams = EventStreams(tuple(channels), _run_metadata(seq, config, rng_seed))
    return apply_dead_time(streams, config.dead_time)


def _dead_time_filter(times: np.ndarray, dead_time: float) -> np.ndarray:
    keep = np.empty(times.size, dtype=bool)
    last = -math.inf
    for i, t in enumerate(times):
        ok = (t - last) >= dead_time
        keep[i] = ok
        if ok:
            last = t
    return times[keep]


def apply_dead_time(streams: EventStreams, dead_time: float) -> EventStreams:
    """Channel-wise: drop events closer than dead_time to the previously kept one.

    Idempotent for a fixed dead time; dead_time 0 is the identity.
    """
    if dead_time < 0 or not math.isfinite(dead_time):
        raise ValueError("dead_time must be nonnegative")
    for name, ch in zip(CHANNEL_NAMES, streams.channels):
        if ch.size and np.any(np.diff(ch) < 0):
            raise ValueError(f"{name}: dead-time filter requires sorted input")
    if dead_time == 0.0:
        return streams
    filtered = tuple(_dead_time_filter(ch, dead_time) for ch in streams.channels)
    return EventStreams(filtered, streams.metadata)


def planck_dot_counts(
    envelope: EnvelopeSpec,
    count: int,
    fill_gain: float,
    replications: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Dot counts for one packet replayed against fresh uniform banks.

    Each replication draws a brand-new bank of ``count`` uniform fill levels,
    absorbs the whole packet (equal intensity share per absorber) and counts
    saturations, including the rare repeat saturations after a reset.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    if count < 1:
        raise ValueError("absorber count must be positive")
    delta = fill_gain * envelope.intensity_integral() / count
    dots = np.zeros(replications, dtype=np.int64)
    if delta <= 0.0:
        return dots
    rows = max(1, (1 << 22) // count)
    start = 0
    while start < replications:
        stop = min(start + rows, replications)
        u = rng.random((stop - start, count))
        crossed = u >= 1.0 - delta
        dots[start:stop] = crossed.sum(axis=1)
        # repeat saturations: leftover fill may push a freshly reset absorber over 1
        residual = np.where(crossed, delta - (1.0 - u), 0.0).ravel()
        active = np.flatnonzero(residual > 0.0)
        while active.size:
            fresh = rng.random(active.size)
            r = residual[active]
            again = fresh >= 1.0 - r
            rows_idx = active[again] // count
            np.add.at(dots, start + rows_idx, 1)
            residual[active[again]] = r[again] - (1.0 - fresh[again])
            residual[active[~again]] = 0.0
            active = active[again][residual[active[again]] > 0.0]
        start = stop
    return dots
