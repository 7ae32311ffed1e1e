"""Plot-ready tables and figures built from certify and search runs."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certificates import CertificateKind, DiscernibilityReport, family_densities
from .search import (
    SearchConfig,
    SearchProblem,
    UnsupportedCountWarning,
    find_indiscernible_tuple,
    verify_witness,
)

CERTIFY_COLUMNS = ("separation", "gap")
SEARCH_COLUMNS = ("k", "d", "restarts_used", "residual", "status")


@dataclass
class BatchRow:
    k: int
    d: int
    restarts_used: int
    residual: float
    status: str


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "nan")
    return str(v)


def emit_plot_data(report) -> str:
    """CSV text for a certify report or a list of search batch rows.

    Comma separated, LF line endings, always with a header; an empty batch
    gives the header alone.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(report, DiscernibilityReport):
        w.writerow(CERTIFY_COLUMNS)
        for s, g in zip(report.separations, report.gaps):
            w.writerow((_fmt(float(s)), _fmt(float(g))))
    else:
        w.writerow(SEARCH_COLUMNS)
        for r in report:
            w.writerow((r.k, r.d, r.restarts_used, _fmt(float(r.residual)), r.status))
    return buf.getvalue()


def phase_change_batch(d: int = 2, config: SearchConfig = SearchConfig()) -> list[BatchRow]:
    """Pair searches on cuboids with the first ``k`` quadratic-certificate
    densities, for ``k = 1 .. 2d``.

    Below ``2d`` the prefix leaves a positive-dimensional fibre and a pair is
    found; at ``k = 2d`` the full certificate is injective and nothing is.
    """
    full = family_densities(CertificateKind("cuboid-quadratic", d))
    rows = []
    for k in range(1, 2 * d + 1):
        prob = SearchProblem("cuboid", full.prefix(k))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnsupportedCountWarning)
            res = find_indiscernible_tuple(prob, config)
        status = res.status
        if status == "found" and not verify_witness(res, prob, config).verified:
            status = "unverified"
        rows.append(BatchRow(k, d, res.restarts_used, res.residual_inf, status))
    return rows


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_certify(report: DiscernibilityReport, path: Path) -> Path:
    """Scatter of moment gap against parameter separation, log-log."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(report.separations, report.gaps, ".", ms=2, alpha=0.5)
    seps = np.array([report.separations.min(), report.separations.max()])
    ax.loglog(seps, report.min_gap_over_separation * seps, "k--", lw=1, label="min gap/separation")
    ax.set_xlabel("separation in shape coordinates")
    ax.set_ylabel("moment gap (sup norm)")
    ax.set_title(f"{report.kind}, d={report.d}, {report.pairs_tested} pairs")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_batch(rows: list[BatchRow], path: Path) -> Path:
    """Best residual per measure count; found runs filled, others hollow."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for r in rows:
        found = r.status == "found"
        y = max(r.residual, 1e-18)
        ax.semilogy([r.k], [y], "o", ms=9, mfc="C0" if found else "none", mec="C0" if found else "C3")
        ax.annotate(r.status, (r.k, y), textcoords="offset points", xytext=(6, 6), fontsize=8)
    if rows:
        ax.axvline(2 * rows[0].d - 0.5, color="0.6", ls=":", lw=1)
        ax.set_xticks([r.k for r in rows])
        ax.set_xlim(0.5, rows[-1].k + 0.9)
    ax.set_xlabel("number of measures k")
    ax.set_ylabel("best residual (sup norm)")
    ax.set_title("indiscernible pairs of cuboids")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
