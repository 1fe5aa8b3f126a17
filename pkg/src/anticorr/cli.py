"""Command-line frontend.

Subcommands mirror the separable claims of the experiment: ``simulate`` and
``analyze`` compose through CTAG files, ``scan-shape`` profiles the packet
envelope, ``bell-check`` runs the joint-distribution feasibility test, and
``poisson-check`` exercises the absorber dot-count law.

Exit codes: 0 success, 1 configuration error, 2 inconclusive verdict when
--fail-on-inconclusive was given, 3 I/O or file-format failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bell import PairwiseSpec, check_feasibility, conjunction_bound
from .coincidence import Verdict
from .pipeline import (
    analyze_file,
    report_payload,
    run_experiment,
    run_poisson_diagnostic,
    run_shape_scan,
    _dump_json,
    _report_csv,
)
from .runconfig import ConfigError, SPECIES_PRESETS, load_run_config
from .source import EnvelopeSpec
from .timetag import CTAGError, export_csv, read_stream

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCONCLUSIVE = 2
EXIT_IO = 3


def _add_config_flags(sub: argparse.ArgumentParser, default_model: str | None = None) -> None:
    sub.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    sub.add_argument("--seed", type=int, default=None, help="master seed (overrides the file)")
    sub.add_argument(
        "--model",
        choices=["copenhagen", "planck"],
        default=default_model,
        help="detector physics lane (overrides the file)",
    )
    sub.add_argument("--alpha", type=float, default=None, help="coincidence half-window, seconds")
    sub.add_argument(
        "--species",
        choices=sorted(SPECIES_PRESETS),
        default=None,
        help="parameter preset for the particle species",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anticorr",
        description="Beam-splitter coincidence experiment simulator and analyzer",
    )
    parser.add_argument("--version", action="version", version=f"anticorr {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="generate a time-tag stream under one physics lane")
    _add_config_flags(sim)
    sim.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    sim.add_argument("--basename", default="run")
    sim.add_argument("--csv", action="store_true", help="also export the stream as CSV")
    sim.set_defaults(func=_cmd_simulate)

    ana = subs.add_parser("analyze", help="coincidence analysis of a CTAG stream")
    ana.add_argument("--input", type=Path, required=True, help="CTAG file from simulate")
    ana.add_argument("--alpha", type=float, default=None, help="override the recorded window")
    ana.add_argument("--out", type=Path, default=Path("out"))
    ana.add_argument("--basename", default="run")
    ana.add_argument("--format", choices=["json", "csv"], default="json")
    ana.add_argument("--no-figures", action="store_true")
    ana.add_argument(
        "--fail-on-inconclusive",
        action="store_true",
        help="exit with code 2 when the verdict is inconclusive",
    )
    ana.set_defaults(func=_cmd_analyze)

    scan = subs.add_parser("scan-shape", help="shifted-window packet shape scan (splitter removed)")
    _add_config_flags(scan)
    scan.add_argument("--out", type=Path, default=Path("out"))
    scan.add_argument("--basename", default="scan")
    scan.add_argument("--s-min", type=float, default=None, help="scan grid start, seconds")
    scan.add_argument("--s-max", type=float, default=None, help="scan grid end, seconds")
    scan.add_argument("--s-points", type=int, default=161, help="number of grid points")
    scan.add_argument("--no-figures", action="store_true")
    scan.set_defaults(func=_cmd_scan)

    bell = subs.add_parser(
        "bell-check",
        help="joint-distribution feasibility for three binary variables",
    )
    bell.add_argument(
        "numbers",
        type=float,
        nargs=6,
        metavar="P",
        help="m1 m2 m3 a12 a13 a23 (marginals then pairwise agreements)",
    )
    bell.add_argument("--out", type=Path, default=None, help="also write the JSON here")
    bell.set_defaults(func=_cmd_bell)

    poi = subs.add_parser("poisson-check", help="absorber dot-count law diagnostic")
    poi.add_argument("--shape", choices=["gaussian", "rectangular"], default="gaussian")
    poi.add_argument("--width", type=float, default=1e-9, help="sigma or duration, seconds")
    poi.add_argument("--amplitude", type=float, default=1.0)
    poi.add_argument("--fill-gain", type=float, required=True)
    poi.add_argument("--absorbers", type=int, default=4096)
    poi.add_argument("--replications", type=int, default=100_000)
    poi.add_argument("--seed", type=int, default=0)
    poi.add_argument("--out", type=Path, default=Path("out"))
    poi.add_argument("--basename", default="poisson")
    poi.add_argument("--no-figures", action="store_true")
    poi.set_defaults(func=_cmd_poisson)

    return parser


def _load_config(args, force_transmittance_one: bool = False):
    config = load_run_config(
        args.config,
        species=args.species,
        seed=args.seed,
        model=args.model,
        alpha=args.alpha,
    )
    return config


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    result = run_experiment(config, args.out, basename=args.basename, render=False)
    if args.csv:
        export_csv(result.streams, args.out / f"{args.basename}.csv")
    counts = result.streams.counts()
    print(f"wrote {result.ctag_path} (D0={counts[0]}, D1={counts[1]}, D2={counts[2]})")
    print(f"wrote {result.report_path} (verdict: {result.report.verdict.value})")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    streams, report, guard = analyze_file(args.input, alpha=args.alpha)
    payload = report_payload(report, guard, streams.metadata)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        report_path = out / f"{args.basename}_report.csv"
        report_path.write_text(_report_csv(payload))
    else:
        report_path = out / f"{args.basename}_report.json"
        _dump_json(payload, report_path)
    print(f"wrote {report_path}")
    if not args.no_figures:
        from . import plots

        figure_path = plots.report_figure(report, guard, out / f"{args.basename}_report.png")
        print(f"wrote {figure_path}")
    print(
        f"n0={report.n0} p1={report.p1.value:.6g} p2={report.p2.value:.6g} "
        f"p3={report.p3.value:.6g} p1*p2={report.product_p1p2.value:.6g} "
        f"p0={report.p0_theoretical if report.p0_theoretical is not None else 'n/a'}"
    )
    print(f"verdict: {report.verdict.value}")
    if guard.flagged:
        print(f"warning: low-intensity run (p1*p2 = {guard.product:.3g} <= {guard.floor:g})")
    if args.fail_on_inconclusive and report.verdict is Verdict.INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _cmd_scan(args) -> int:
    config = _load_config(args)
    s_values = None
    if args.s_min is not None or args.s_max is not None:
        if args.s_min is None or args.s_max is None or args.s_points < 0:
            raise ConfigError("scan grid: give both --s-min and --s-max (and --s-points >= 0)")
        import numpy as np

        s_values = np.linspace(args.s_min, args.s_max, args.s_points)
    result = run_shape_scan(
        config, s_values, args.out, basename=args.basename, render=not args.no_figures
    )
    print(f"wrote {result.csv_path}")
    print(result.summary_text(), end="")
    return EXIT_OK


def _cmd_bell(args) -> int:
    spec = PairwiseSpec(marginals=tuple(args.numbers[:3]), agreements=tuple(args.numbers[3:]))
    result = check_feasibility(spec)
    payload = {"spec": spec.to_dict(), **result.to_dict()}
    payload["conjunction_bound_of_complements"] = conjunction_bound(
        1.0 - spec.agreements[0], 1.0 - spec.agreements[1]
    )
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n")
    return EXIT_OK


def _cmd_poisson(args) -> int:
    packet = EnvelopeSpec(args.shape, args.width, args.amplitude)
    diag = run_poisson_diagnostic(
        packet,
        replications=args.replications,
        rng_seed=args.seed,
        absorber_count=args.absorbers,
        fill_gain=args.fill_gain,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{args.basename}.json"
    _dump_json(diag.to_dict(), json_path)
    print(f"wrote {json_path}")
    if not args.no_figures:
        from . import plots

        figure_path = plots.poisson_figure(
            diag.histogram(), diag.lambda_expected, diag.replications, out / f"{args.basename}.png"
        )
        print(f"wrote {figure_path}")
    if diag.degenerate:
        print(f"lambda={diag.lambda_expected:.6g}: degenerate histogram, no chi-square fit")
    else:
        print(
            f"lambda={diag.lambda_expected:.6g} chi2={diag.chi2_statistic:.4g} "
            f"dof={diag.dof} p={diag.p_value:.4g}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CTAGError as exc:
        print(f"stream format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
