"""Acceptance suite: every criterion checked at its stated tolerance.

Each test prints one PASS/FAIL line so a plain ``pytest -s tests/test_acceptance.py``
reads as a checklist.  Operating points are chosen so the statistical criteria
hold with wide margins at the fixed seeds.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from anticorr.bell import PairwiseSpec, check_feasibility, conjunction_bound
from anticorr.coincidence import Verdict, WindowConfig, estimate_p
from anticorr.pipeline import (
    analyze_streams,
    report_payload,
    run_experiment,
    run_poisson_diagnostic,
    run_shape_scan,
)
from anticorr.runconfig import build_run_config
from anticorr.source import EnvelopeSpec
from anticorr.timetag import EventStreams, read_stream

from oracles import brute_force_counts, grid_feasible

DATA_DIR = Path(__file__).parent / "data"


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_01_planck_product_rule(tmp_path):
    started = time.perf_counter()
    config = build_run_config(None, seed=20260801, model="planck")
    result = run_experiment(config, tmp_path, render=False)
    elapsed = time.perf_counter() - started
    r = result.report
    diff = abs(r.p3.value - r.product_p1p2.value)
    se = math.sqrt(r.p3.se**2 + r.product_p1p2.se**2)
    ok = (
        r.p0_theoretical < 1e-4
        and r.n0 >= 1_000_000
        and diff <= 3 * se
        and r.verdict is Verdict.PLANCK_CONSISTENT
        and elapsed < 60.0
    )
    _report(
        "1 planck p3 = p1*p2",
        ok,
        f"n0={r.n0}, p0={r.p0_theoretical:.2e}, |p3 - p1p2|={diff:.2e} <= 3se={3 * se:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_02_copenhagen_bound(tmp_path):
    config = build_run_config(None, seed=20260802, model="copenhagen")
    result = run_experiment(config, tmp_path, render=False)
    r = result.report
    gap_se = math.sqrt(r.p3.se**2 + r.product_p1p2.se**2)
    gap = (r.product_p1p2.value - r.p3.value) / gap_se
    ok = (
        r.p1.value >= 0.2
        and r.p2.value >= 0.2
        and r.p3.value <= r.p0_theoretical + 3 * r.p3.se
        and r.p3.value < r.product_p1p2.value
        and gap >= 10.0
        and r.verdict is Verdict.COPENHAGEN_CONSISTENT
    )
    _report(
        "2 copenhagen p3 <= p0",
        ok,
        f"p3={r.p3.value:.2e} <= p0+3se={r.p0_theoretical + 3 * r.p3.se:.2e}, "
        f"product {gap:.0f} se above p3",
    )


def test_03_significance_gate_rate_sweep(tmp_path):
    verdicts = []
    for rate, duration, seed in ((5e6, 0.05, 20260803), (1e7, 0.025, 20260804)):
        config = build_run_config(
            {"source": {"mean_emission_rate": rate, "run_duration": duration}},
            seed=seed,
            model="copenhagen",
        )
        result = run_experiment(config, tmp_path / f"rate_{int(rate)}", render=False)
        r = result.report
        product = r.p1.value * r.p2.value
        verdicts.append((r.p0_theoretical < product, r.verdict))
    below_ok = verdicts[0] == (True, Verdict.COPENHAGEN_CONSISTENT)
    above_ok = verdicts[1][0] is False and verdicts[1][1] is Verdict.INCONCLUSIVE
    _report(
        "3 significance gate",
        below_ok and above_ok,
        f"below crossover {verdicts[0][1].value}, above crossover {verdicts[1][1].value}",
    )


def test_04_poisson_dot_law():
    packet = EnvelopeSpec("gaussian", 1e-9)
    energy = packet.intensity_integral()
    details = []
    ok = True
    for lam, seed in ((0.5, 101), (1.0, 102), (2.0, 103)):
        diag = run_poisson_diagnostic(
            packet,
            replications=100_000,
            rng_seed=seed,
            absorber_count=4096,
            fill_gain=lam / energy,
        )
        # lambda comes from the configuration alone: gain * (E / n) * n
        assert diag.lambda_expected == pytest.approx(
            (lam / energy) * (energy / 4096) * 4096, rel=1e-12
        )
        details.append(f"lambda={lam}: p={diag.p_value:.3f}")
        ok = ok and diag.p_value >= 0.01
    _report("4 poisson dot law", ok, ", ".join(details))


def test_05_estimator_matches_bruteforce():
    rng = np.random.default_rng(20260805)
    checked_boundary = 0
    for trial in range(1000):
        n0 = int(rng.integers(1, 1001))
        n1 = int(rng.integers(0, 1001))
        n2 = int(rng.integers(0, 1001))
        if trial % 2:
            scale = 64.0
            d0 = np.sort(rng.integers(0, 4096, n0)) / scale
            d1 = np.sort(rng.integers(0, 4096, n1)) / scale
            d2 = np.sort(rng.integers(0, 4096, n2)) / scale
            alpha = float(rng.integers(1, 256)) / scale
            if n1 and np.any(np.abs(d1[None, :] - d0[:, None]) == alpha):
                checked_boundary += 1
        else:
            d0 = np.sort(rng.uniform(0, 50, n0))
            d1 = np.sort(rng.uniform(0, 50, n1))
            d2 = np.sort(rng.uniform(0, 50, n2))
            alpha = float(rng.uniform(0.001, 2.0))
        streams = EventStreams((d0, d1, d2), {})
        report = estimate_p(streams, WindowConfig(alpha))
        got = (
            round(report.p1.value * n0),
            round(report.p2.value * n0),
            round(report.p3.value * n0),
        )
        expected = brute_force_counts(d0, d1, d2, alpha)
        assert got == expected, f"trial {trial}: {got} != {expected}"
    _report(
        "5 estimator oracle",
        checked_boundary > 100,
        f"1000 streams exact, {checked_boundary} with exact |t0 - t1| = alpha ties",
    )


def test_06_shape_scan_width_recovery(tmp_path):
    started = time.perf_counter()
    gauss = build_run_config(
        {
            "source": {
                "mean_emission_rate": 2000.0,
                "run_duration": 500.0,
                "blue": {"shape": "gaussian", "duration_or_sigma": 2e-9},
                "green": {"shape": "gaussian", "duration_or_sigma": 2e-9},
            },
            "apparatus": {"splitter_transmittance": 1.0, "path_delays": [0.0, 3e-9, 0.0]},
            "window": {"alpha": 1e-9},
        },
        seed=20260806,
        model="copenhagen",
    )
    res_g = run_shape_scan(gauss, out_dir=tmp_path / "gauss", render=False)
    rel_g = abs(res_g.recovered_width - 2e-9) / 2e-9

    rect = build_run_config(
        {
            "source": {
                "mean_emission_rate": 2000.0,
                "run_duration": 500.0,
                "blue": {"shape": "rectangular", "duration_or_sigma": 2e-9},
                "green": {"shape": "rectangular", "duration_or_sigma": 1e-8},
            },
            "apparatus": {"splitter_transmittance": 1.0},
            "window": {"alpha": 1e-9},
        },
        seed=20260807,
        model="copenhagen",
    )
    res_r = run_shape_scan(rect, out_dir=tmp_path / "rect", render=False)
    rel_r = abs(res_r.recovered_width - 1e-8) / 1e-8
    elapsed = time.perf_counter() - started

    peak = max(res_g.points, key=lambda pt: pt.probability.value)
    ok = rel_g <= 0.10 and rel_r <= 0.10 and abs(peak.shift - 3e-9) <= 1e-9 and elapsed < 120.0
    _report(
        "6 shape scan",
        ok,
        f"gaussian sigma err {rel_g:.2%}, plateau err {rel_r:.2%}, "
        f"peak at delay diff, {elapsed:.0f}s",
    )


def test_07_three_variable_no_joint_distribution():
    quarter = PairwiseSpec((0.5, 0.5, 0.5), (0.25, 0.25, 0.25))
    result = check_feasibility(quarter)
    cert_ok = (
        not result.feasible
        and result.certificate is not None
        and result.certificate.verify(quarter)
    )
    bound_ok = conjunction_bound(0.75, 0.75) == 0.5

    sweep_ok = True
    for k in range(129):
        a = k / 128.0
        spec = PairwiseSpec((0.5, 0.5, 0.5), (0.25, 0.25, a))
        lp = check_feasibility(spec).feasible
        grid, _ = grid_feasible((0.5, 0.5, 0.5), (0.25, 0.25, a))
        sweep_ok = sweep_ok and lp == grid == (a >= 0.5)
    _report(
        "7 no common distribution",
        cert_ok and bound_ok and sweep_ok,
        "quarter-agreement triple infeasible with verified certificate, "
        "bound(3/4,3/4)=1/2, threshold a>=1/2 matches 2^-7 grid",
    )


def test_08_determinism_and_golden_files(tmp_path):
    raw = yaml.safe_load((DATA_DIR / "golden_config.yaml").read_text())
    config = build_run_config(raw)
    a = run_experiment(config, tmp_path / "a", basename="golden", render=False)
    b = run_experiment(config, tmp_path / "b", basename="golden", render=False)
    regen_identical = a.ctag_path.read_bytes() == b.ctag_path.read_bytes()

    committed = (DATA_DIR / "golden.ctag").read_bytes()
    matches_committed = a.ctag_path.read_bytes() == committed

    streams = read_stream(DATA_DIR / "golden.ctag")
    report, guard = analyze_streams(streams)
    payload = report_payload(report, guard, streams.metadata)
    golden_payload = json.loads((DATA_DIR / "golden_report.json").read_text())
    report_matches = payload == golden_payload

    ok = regen_identical and matches_committed and report_matches
    _report(
        "8 determinism and format stability",
        ok,
        f"regen identical: {regen_identical}, matches committed bytes: {matches_committed}, "
        f"re-analysis matches committed report: {report_matches}",
    )
