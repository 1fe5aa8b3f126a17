"""End-to-end orchestration: simulate, write, analyze, scan, diagnose.

All file I/O of the toolkit lives here and in the CLI wrapper; the compute
modules only ever see arrays and dataclasses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .apparatus import (
    AbsorberBank,
    PhysicsModel,
    detect_copenhagen,
    detect_planck,
    planck_dot_counts,
)
from .coincidence import (
    CoincidenceReport,
    LowIntensityDiagnostic,
    ScanPoint,
    WindowConfig,
    estimate_p,
    low_intensity_guard,
    recover_gaussian_sigma,
    recover_plateau_width,
    shape_scan,
)
from .runconfig import ConfigError, RunConfig
from .source import EnvelopeSpec, generate_emissions
from .timetag import EventStreams, read_stream, write_stream


def simulate(config: RunConfig) -> EventStreams:
    """Generate emissions and run the configured detector lane.

    Deterministic in the master seed: the source, the detection draws and the
    initial bank levels all use seeds derived from it.  The returned stream
    metadata embeds the full resolved configuration.
    """
    seeds = config.derived_seeds
    emissions = generate_emissions(config.source)
    if config.apparatus.physics_model is PhysicsModel.PLANCK:
        bank_rng = np.random.default_rng(seeds["banks"])
        banks = tuple(
            AbsorberBank.fresh(config.bank.absorber_count, config.bank.fill_gain, bank_rng)
            for _ in range(3)
        )
        streams = detect_planck(emissions, config.apparatus, banks, seeds["detect"])
    else:
        streams = detect_copenhagen(emissions, config.apparatus, seeds["detect"])
    streams.metadata["run"]["seed"] = int(config.seed)
    streams.metadata["run"]["species"] = config.species
    streams.metadata["window"] = config.window.to_dict()
    streams.metadata["analysis"] = config.analysis.to_dict()
    streams.metadata["bank"] = config.bank.to_dict()
    return streams


def report_payload(report: CoincidenceReport, guard: LowIntensityDiagnostic, metadata: dict) -> dict:
    """JSON-ready report: estimates, verdict, guard, and the full config echo."""
    payload = report.to_dict()
    payload["low_intensity"] = guard.to_dict()
    payload["config"] = {
        key: metadata[key]
        for key in ("run", "source", "apparatus", "window", "analysis", "bank", "format")
        if key in metadata
    }
    return payload


def analyze_streams(
    streams: EventStreams,
    alpha: float | None = None,
    floor: float | None = None,
) -> tuple[CoincidenceReport, LowIntensityDiagnostic]:
    """Analysis from a stream alone; defaults come from its embedded metadata."""
    if alpha is None:
        try:
            alpha = float(streams.metadata["window"]["alpha"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(
                "stream metadata carries no window.alpha; pass alpha explicitly"
            ) from exc
    if floor is None:
        floor = float(
            streams.metadata.get("analysis", {}).get("low_intensity_floor", 1e-4)
        )
    report = estimate_p(streams, WindowConfig(alpha=alpha))
    guard = low_intensity_guard(report, floor)
    return report, guard


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _report_csv(payload: dict) -> str:
    rows = ["key,value\n"]

    def walk(prefix: str, value) -> None:
        if isinstance(value, dict):
            for k in sorted(value):
                walk(f"{prefix}.{k}" if prefix else str(k), value[k])
        elif isinstance(value, (list, tuple)):
            rows.append(f"{prefix},\"{';'.join(repr(v) for v in value)}\"\n")
        else:
            rows.append(f"{prefix},{value!r}\n")

    walk("", payload)
    return "".join(rows)


@dataclass
class ExperimentResult:
    config: RunConfig
    streams: EventStreams
    report: CoincidenceReport
    guard: LowIntensityDiagnostic
    ctag_path: Path | None = None
    report_path: Path | None = None
    figure_path: Path | None = None


def run_experiment(
    config: RunConfig,
    out_dir,
    basename: str = "run",
    fmt: str = "json",
    render: bool = True,
) -> ExperimentResult:
    """Simulate, persist the CTAG stream, analyze it, and write the report.

    The analysis runs on the re-read file, so the written artifact is exactly
    what the report describes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = simulate(config)
    ctag_path = out / f"{basename}.ctag"
    write_stream(streams, ctag_path)

    reread = read_stream(ctag_path)
    report, guard = analyze_streams(reread)
    payload = report_payload(report, guard, reread.metadata)

    report_path = out / f"{basename}_report.{ 'csv' if fmt == 'csv' else 'json' }"
    if fmt == "csv":
        report_path.write_text(_report_csv(payload))
    else:
        _dump_json(payload, report_path)

    figure_path = None
    if render:
        from . import plots

        figure_path = out / f"{basename}_report.png"
        plots.report_figure(report, guard, figure_path)
    return ExperimentResult(config, reread, report, guard, ctag_path, report_path, figure_path)


@dataclass
class ShapeScanResult:
    points: list[ScanPoint]
    envelope_shape: str
    recovered_width: float | None
    configured_width: float
    csv_path: Path | None = None
    summary_path: Path | None = None
    figure_path: Path | None = None

    def summary_text(self) -> str:
        kind = "sigma" if self.envelope_shape == "gaussian" else "plateau duration"
        lines = [f"shape scan points: {len(self.points)}"]
        if self.recovered_width is None:
            lines.append("recovered width: n/a (empty scan grid)")
        else:
            lines.append(f"recovered {kind}: {self.recovered_width:.6g} s")
            lines.append(f"configured {kind}: {self.configured_width:.6g} s")
            rel = abs(self.recovered_width - self.configured_width) / self.configured_width
            lines.append(f"relative deviation: {100.0 * rel:.2f}%")
        return "\n".join(lines) + "\n"


def default_scan_grid(config: RunConfig, n_points: int = 161) -> np.ndarray:
    """Grid centred on the D0-to-D1 delay difference, spanning the profile."""
    delays = config.apparatus.path_delays
    centre = delays[1] - delays[0]
    spread = config.window.alpha + 5.0 * math.sqrt(
        config.source.blue.offset_variance() + config.source.green.offset_variance()
    )
    return np.linspace(centre - spread, centre + spread, n_points)


def run_shape_scan(
    config: RunConfig,
    s_values=None,
    out_dir=None,
    basename: str = "scan",
    render: bool = True,
) -> ShapeScanResult:
    """Simulate with the splitter removed and profile p(s) over the shift grid."""
    if config.apparatus.splitter_transmittance != 1.0:
        raise ConfigError(
            "apparatus.splitter_transmittance: shape scan requires the splitter removed "
            "(transmittance = 1)"
        )
    if s_values is None:
        s_values = default_scan_grid(config)
    s_values = np.asarray(list(s_values), dtype=np.float64)

    streams = simulate(config)
    alpha = config.window.alpha
    points = shape_scan(streams, alpha, s_values) if s_values.size else []

    green = config.source.green
    recovered = None
    if points:
        if green.shape == "gaussian":
            trigger_sigma = math.sqrt(config.source.blue.offset_variance())
            recovered = recover_gaussian_sigma(points, alpha, trigger_sigma)
        else:
            recovered = recover_plateau_width(points)
    result = ShapeScanResult(
        points=points,
        envelope_shape=green.shape,
        recovered_width=recovered,
        configured_width=green.duration_or_sigma,
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = out / f"{basename}.csv"
        rows = ["shift_s,p,ci_low,ci_high\n"]
        rows += [f"{s!r},{p!r},{lo!r},{hi!r}\n" for s, p, lo, hi in (pt.to_row() for pt in points)]
        result.csv_path.write_text("".join(rows))
        result.summary_path = out / f"{basename}_summary.txt"
        result.summary_path.write_text(result.summary_text())
        if render and points:
            from . import plots

            result.figure_path = out / f"{basename}.png"
            plots.scan_figure(points, result.figure_path, recovered, green.shape)
    return result


@dataclass
class PoissonDiagnostic:
    """Dot-count histogram against the e^-lambda lambda^n / n! prediction.

    ``lambda_expected`` is computed from the configuration alone (fill gain
    times per-absorber intensity share times absorber count), never fitted to
    the sampled histogram.
    """

    replications: int
    counts: np.ndarray
    lambda_expected: float
    chi2_statistic: float | None
    dof: int | None
    p_value: float | None
    degenerate: bool

    def histogram(self) -> np.ndarray:
        return np.bincount(self.counts)

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "histogram": self.histogram().tolist(),
            "lambda_expected": self.lambda_expected,
            "chi2_statistic": self.chi2_statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "degenerate": self.degenerate,
        }


def _poisson_chi_square(counts: np.ndarray, lam: float) -> tuple[float, int] | None:
    """Chi-square statistic against Poisson(lam) with tail lumping (>= 5 rule)."""
    n = counts.size
    # largest k with expected tail mass n * P(X >= k) still at least 5
    k = 1
    while n * stats.poisson.sf(k - 1, lam) >= 5.0:
        k += 1
    k -= 1
    if k < 1:
        return None
    observed = np.bincount(np.minimum(counts, k), minlength=k + 1).astype(float)
    expected = np.empty(k + 1)
    expected[:k] = n * stats.poisson.pmf(np.arange(k), lam)
    expected[k] = n * stats.poisson.sf(k - 1, lam)
    statistic = float(((observed - expected) ** 2 / expected).sum())
    return statistic, k  # dof = (k + 1 bins) - 1


def run_poisson_diagnostic(
    packet: EnvelopeSpec,
    bank: AbsorberBank | None = None,
    replications: int = 100_000,
    rng_seed: int = 0,
    *,
    absorber_count: int | None = None,
    fill_gain: float | None = None,
) -> PoissonDiagnostic:
    """Replay one packet against fresh uniform banks and test the dot-count law.

    The bank argument only provides the absorber count and fill gain; levels
    are redrawn uniformly for every replication.  The default count is large
    (4096) because a small bank's counts are visibly binomial rather than
    Poisson; the detection lanes keep their own, smaller default.
    """
    if replications < 1000:
        raise ValueError("at least 1000 replications are required")
    if bank is not None:
        absorber_count = bank.count
        fill_gain = bank.fill_gain
    if absorber_count is None:
        absorber_count = 4096
    if fill_gain is None:
        raise ValueError("fill_gain required (pass a bank or the scalar)")

    lam = fill_gain * packet.intensity_integral()
    rng = np.random.default_rng(rng_seed)
    counts = planck_dot_counts(packet, absorber_count, fill_gain, replications, rng)

    if lam == 0.0:
        return PoissonDiagnostic(replications, counts, 0.0, None, None, None, True)
    fit = _poisson_chi_square(counts, lam)
    if fit is None:
        return PoissonDiagnostic(replications, counts, lam, None, None, None, True)
    statistic, dof = fit
    p_value = float(stats.chi2.sf(statistic, dof))
    return PoissonDiagnostic(replications, counts, lam, statistic, dof, p_value, False)


def analyze_file(
    path, alpha: float | None = None, floor: float | None = None
) -> tuple[EventStreams, CoincidenceReport, LowIntensityDiagnostic]:
    streams = read_stream(path)
    report, guard = analyze_streams(streams, alpha=alpha, floor=floor)
    return streams, report, guard
