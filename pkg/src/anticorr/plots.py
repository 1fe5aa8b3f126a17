"""Figure rendering for reports, shape scans, and the dot-count diagnostic."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from .coincidence import CoincidenceReport, LowIntensityDiagnostic, ScanPoint


def report_figure(
    report: CoincidenceReport, guard: LowIntensityDiagnostic, path
) -> Path:
    """Estimates with intervals, the product, and the p0 overlap floor."""
    labels = ["p1", "p2", "p3", "p1*p2"]
    ests = [report.p1, report.p2, report.p3, report.product_p1p2]
    x = np.arange(len(ests))
    values = [e.value for e in ests]
    yerr = np.array(
        [[e.value - e.ci_low for e in ests], [e.ci_high - e.value for e in ests]]
    )

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(x, values, yerr=yerr, fmt="o", capsize=4, color="#0173b2")
    if report.p0_theoretical is not None:
        ax.axhline(
            report.p0_theoretical, color="#d55e00", ls="--", lw=1.2,
            label=f"p0 = {report.p0_theoretical:.3g}",
        )
        ax.legend(loc="best")
    ax.set_xticks(x, labels)
    ax.set_ylabel("conditional probability")
    title = f"verdict: {report.verdict.value} (n0 = {report.n0})"
    if guard.flagged:
        title += "  [low intensity]"
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def scan_figure(points: list[ScanPoint], path, recovered: float | None, shape: str) -> Path:
    """p(s) profile with intervals and the recovered width annotation."""
    s = np.array([pt.shift for pt in points])
    p = np.array([pt.probability.value for pt in points])
    lo = np.array([pt.probability.ci_low for pt in points])
    hi = np.array([pt.probability.ci_high for pt in points])

    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(s, p, color="#0173b2", lw=1.2)
    ax.fill_between(s, lo, hi, color="#0173b2", alpha=0.25, lw=0)
    ax.set_xlabel("window shift s (s)")
    ax.set_ylabel("p(s)")
    title = f"{shape} envelope profile"
    if recovered is not None:
        kind = "sigma" if shape == "gaussian" else "plateau"
        title += f", recovered {kind} = {recovered:.3g} s"
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def poisson_figure(histogram: np.ndarray, lam: float, replications: int, path) -> Path:
    """Observed dot-count frequencies against the Poisson prediction."""
    n = np.arange(histogram.size)
    observed = histogram / max(replications, 1)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(n, observed, width=0.8, color="#0173b2", alpha=0.7, label="observed")
    if lam > 0:
        ax.plot(n, stats.poisson.pmf(n, lam), "o-", color="#d55e00", ms=5,
                label=f"Poisson({lam:.3g})")
    ax.set_xlabel("dots per packet")
    ax.set_ylabel("frequency")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
