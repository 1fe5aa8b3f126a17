"""Run configuration: schema, field-level validation, species presets, YAML I/O.

A run is specified by one nested mapping (YAML on disk).  Every default is
resolved here, so the configuration echoed into stream metadata and reports is
complete and a run can be reproduced from its outputs alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .apparatus import ApparatusConfig, PhysicsModel
from .coincidence import LOW_INTENSITY_FLOOR, WindowConfig
from .source import EnvelopeSpec, SourceConfig


class ConfigError(ValueError):
    """Configuration rejected; the message carries the offending field path."""


#: particle-species presets: same experiment logic, different envelope and
#: rate defaults (photon pairs, low-intensity electron beams, heavy particles)
SPECIES_PRESETS: dict[str, dict] = {
    "photon": {
        "rate": 2.0e3,
        "duration": 1000.0,
        "envelope": {"shape": "gaussian", "duration_or_sigma": 1.0e-9, "amplitude_scale": 1.0},
        "alpha": 1.0e-8,
        "fill_gain": 1.72e8,
    },
    "electron": {
        "rate": 5.0e2,
        "duration": 2000.0,
        "envelope": {"shape": "gaussian", "duration_or_sigma": 5.0e-9, "amplitude_scale": 1.0},
        "alpha": 5.0e-8,
        "fill_gain": 3.4e7,
    },
    "atom": {
        "rate": 50.0,
        "duration": 20000.0,
        "envelope": {"shape": "gaussian", "duration_or_sigma": 1.0e-7, "amplitude_scale": 1.0},
        "alpha": 1.0e-6,
        "fill_gain": 1.7e6,
    },
}


@dataclass(frozen=True)
class PlanckBankConfig:
    """How to build the three absorber banks for the planck lane."""

    absorber_count: int = 64
    fill_gain: float = 1.72e8

    def __post_init__(self) -> None:
        if self.absorber_count < 1:
            raise ConfigError("bank.absorber_count: must be a positive integer")
        if self.fill_gain < 0 or not math.isfinite(self.fill_gain):
            raise ConfigError("bank.fill_gain: must be nonnegative and finite")

    def to_dict(self) -> dict:
        return {"absorber_count": self.absorber_count, "fill_gain": self.fill_gain}


@dataclass(frozen=True)
class AnalysisConfig:
    low_intensity_floor: float = LOW_INTENSITY_FLOOR

    def __post_init__(self) -> None:
        if self.low_intensity_floor < 0:
            raise ConfigError("analysis.low_intensity_floor: must be nonnegative")

    def to_dict(self) -> dict:
        return {"low_intensity_floor": self.low_intensity_floor}


def derive_seeds(master_seed: int) -> dict[str, int]:
    """Three independent child seeds (source, detection, bank init) from one master."""
    words = np.random.SeedSequence(master_seed).generate_state(3, np.uint64)
    return {"source": int(words[0]), "detect": int(words[1]), "banks": int(words[2])}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved end-to-end run description."""

    seed: int
    source: SourceConfig
    apparatus: ApparatusConfig
    bank: PlanckBankConfig
    window: WindowConfig
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    species: str = "photon"

    @property
    def derived_seeds(self) -> dict[str, int]:
        return derive_seeds(self.seed)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "species": self.species,
            "source": self.source.to_dict(),
            "apparatus": self.apparatus.to_dict(),
            "bank": self.bank.to_dict(),
            "window": self.window.to_dict(),
            "analysis": self.analysis.to_dict(),
        }


def _expect_mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _get_number(mapping: dict, key: str, path: str, default=None) -> float:
    value = mapping.get(key, default)
    if value is None:
        raise ConfigError(f"{path}.{key}: required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _get_int(mapping: dict, key: str, path: str, default=None) -> int:
    value = mapping.get(key, default)
    if value is None:
        raise ConfigError(f"{path}.{key}: required")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    return int(value)


def _envelope_from(mapping: dict, path: str, preset_env: dict) -> EnvelopeSpec:
    merged = dict(preset_env)
    merged.update(_expect_mapping(mapping, path))
    try:
        return EnvelopeSpec(
            shape=merged.get("shape", "gaussian"),
            duration_or_sigma=float(merged["duration_or_sigma"]),
            amplitude_scale=float(merged.get("amplitude_scale", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: missing or malformed field ({exc})") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _triple(mapping: dict, key: str, path: str, default) -> tuple[float, float, float]:
    value = mapping.get(key, default)
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{path}.{key}: expected three numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: expected three numbers") from exc


def build_run_config(
    data: dict | None = None,
    *,
    species: str | None = None,
    seed: int | None = None,
    model: str | None = None,
    alpha: float | None = None,
) -> RunConfig:
    """Resolve a raw mapping plus overrides into a validated RunConfig.

    Precedence: explicit keyword overrides, then file values, then the species
    preset defaults.
    """
    data = _expect_mapping(data, "config")
    chosen_species = species or data.get("species", "photon")
    if chosen_species not in SPECIES_PRESETS:
        raise ConfigError(
            f"species: unknown preset {chosen_species!r} (choose from {sorted(SPECIES_PRESETS)})"
        )
    preset = SPECIES_PRESETS[chosen_species]

    if seed is None:
        seed = data.get("seed", 20260801)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a nonnegative integer")
    seeds = derive_seeds(seed)

    src_map = _expect_mapping(data.get("source"), "source")
    try:
        source = SourceConfig(
            mean_emission_rate=_get_number(src_map, "mean_emission_rate", "source", preset["rate"]),
            run_duration=_get_number(src_map, "run_duration", "source", preset["duration"]),
            rng_seed=seeds["source"],
            blue=_envelope_from(src_map.get("blue"), "source.blue", preset["envelope"]),
            green=_envelope_from(src_map.get("green"), "source.green", preset["envelope"]),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"source: {exc}") from exc

    app_map = _expect_mapping(data.get("apparatus"), "apparatus")
    model_name = model or app_map.get("physics_model", "planck")
    try:
        physics = PhysicsModel(model_name)
    except ValueError as exc:
        raise ConfigError(f"apparatus.physics_model: unknown model {model_name!r}") from exc
    try:
        apparatus = ApparatusConfig(
            splitter_transmittance=_get_number(app_map, "splitter_transmittance", "apparatus", 0.5),
            path_delays=_triple(app_map, "path_delays", "apparatus", [0.0, 0.0, 0.0]),
            detector_efficiencies=_triple(
                app_map, "detector_efficiencies", "apparatus", [1.0, 1.0, 1.0]
            ),
            dead_time=_get_number(app_map, "dead_time", "apparatus", 0.0),
            physics_model=physics,
            signal_latency=_get_number(app_map, "signal_latency", "apparatus", 0.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"apparatus: {exc}") from exc

    bank_map = _expect_mapping(data.get("bank"), "bank")
    bank = PlanckBankConfig(
        absorber_count=_get_int(bank_map, "absorber_count", "bank", 64),
        fill_gain=_get_number(bank_map, "fill_gain", "bank", preset["fill_gain"]),
    )

    window_map = _expect_mapping(data.get("window"), "window")
    if alpha is None:
        alpha = _get_number(window_map, "alpha", "window", preset["alpha"])
    try:
        window = WindowConfig(alpha=float(alpha), shift_s=_get_number(window_map, "shift_s", "window", 0.0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"window: {exc}") from exc

    analysis_map = _expect_mapping(data.get("analysis"), "analysis")
    analysis = AnalysisConfig(
        low_intensity_floor=_get_number(
            analysis_map, "low_intensity_floor", "analysis", LOW_INTENSITY_FLOOR
        )
    )

    return RunConfig(
        seed=seed,
        source=source,
        apparatus=apparatus,
        bank=bank,
        window=window,
        analysis=analysis,
        species=chosen_species,
    )


def load_run_config(
    path=None,
    *,
    species: str | None = None,
    seed: int | None = None,
    model: str | None = None,
    alpha: float | None = None,
) -> RunConfig:
    """Load a YAML run configuration (or pure defaults when path is None)."""
    data: dict | None = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError:
            raise
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping at the top level")
    return build_run_config(data, species=species, seed=seed, model=model, alpha=alpha)
