"""Static SVG figures rendered from experiment artifacts.

Three figure kinds accompany the delimited report output: a Hill plot
(alpha_hat against the order count), the log-log dispersion-rate regression
with its fitted slope, and the empirical-vs-limit CDF overlay for normalised
partial maxima.  Output is purely static; nothing interactive.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import MissingArtifact
from .stats import frechet_cdf

__all__ = ["PlotRecord", "emit_plots"]


@dataclass
class PlotRecord:
    path: str
    kind: str
    meta: dict


def _save(fig, path: str):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _hill_plot(artifact, alpha_ref, path) -> PlotRecord:
    fig, ax = plt.subplots(figsize=(6, 4))
    ks, alphas = artifact["k_grid"], artifact["alphas"]
    ax.plot(ks, alphas, "o-", ms=3, lw=1)
    if alpha_ref is not None:
        ax.axhline(alpha_ref, color="crimson", ls="--", lw=1, label=f"alpha = {alpha_ref:g}")
        ax.legend()
    ax.set_xscale("log")
    ax.set_xlabel("order statistics used (k)")
    ax.set_ylabel("Hill tail-index estimate")
    ax.set_title("Hill plot")
    _save(fig, path)
    return PlotRecord(path=path, kind="hill", meta={"k_min": int(ks[0]), "k_max": int(ks[-1])})


def _rate_plot(reg, expected, path) -> PlotRecord:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.log(reg.sizes)
    y = np.log(reg.dispersion)
    ax.plot(x, y, "o", label="replication IQR")
    xx = np.linspace(x.min(), x.max(), 50)
    inter = y.mean() - reg.slope * x.mean()
    ax.plot(xx, inter + reg.slope * xx, "-", label=f"fit slope {reg.slope:.3f}")
    if expected is not None:
        ax.plot(xx, (y[0] - expected * x[0]) + expected * xx, ":", label=f"expected {expected:.3f}")
    ax.set_xlabel("log n")
    ax.set_ylabel("log IQR")
    ax.set_title("sample-ACV dispersion rate")
    ax.legend()
    _save(fig, path)
    return PlotRecord(path=path, kind="rate", meta={"slope": reg.slope})


def _cdf_overlay(samples, kappa, alpha, path) -> PlotRecord:
    samples = np.sort(np.asarray(samples, dtype=float))
    q01, q99 = np.quantile(samples, [0.01, 0.99])
    fig, ax = plt.subplots(figsize=(6, 4))
    ecdf = np.arange(1, samples.size + 1) / samples.size
    ax.step(samples, ecdf, where="post", label="empirical")
    xx = np.linspace(max(q01 * 0.5, 1e-9), q99 * 1.1, 400)
    ax.plot(xx, frechet_cdf(xx, kappa, alpha), "--", label="limit CDF")
    ax.set_xlim(q01, q99)
    ax.set_xlabel("normalised running maximum")
    ax.set_ylabel("CDF")
    ax.set_title(f"Frechet-type limit (kappa={kappa:.3g}, alpha={alpha:g})")
    ax.legend()
    _save(fig, path)
    return PlotRecord(path=path, kind="cdf_overlay", meta={"xlim": (float(q01), float(q99))})


def emit_plots(report, artifacts=None, out_dir: str = "out") -> list[PlotRecord]:
    """Render every figure the report's tasks call for; returns the records.

    An empty report produces no files (success); a report row whose backing
    artifact is missing raises MissingArtifact.
    """
    artifacts = artifacts if artifacts is not None else report.artifacts
    records: list[PlotRecord] = []
    tasks = {r.task for r in report.rows}
    if not tasks:
        return records
    os.makedirs(out_dir, exist_ok=True)

    if "tails" in tasks:
        if "hill" not in artifacts:
            raise MissingArtifact("tails rows present but no hill artifact")
        alpha_ref = next(
            (r.theory_value for r in report.rows if r.target_name.startswith("hill")), None
        )
        records.append(
            _hill_plot(artifacts["hill"], alpha_ref, os.path.join(out_dir, "hill_plot.svg"))
        )
    if "acf_rates" in tasks:
        if "rate" not in artifacts:
            raise MissingArtifact("acf_rates rows present but no rate artifact")
        expected = next(
            (r.theory_value for r in report.rows if r.target_name.startswith("dispersion_slope")),
            None,
        )
        records.append(
            _rate_plot(artifacts["rate"], expected, os.path.join(out_dir, "rate_regression.svg"))
        )
    if "maxima_samples" in artifacts:
        m = artifacts["maxima_samples"]
        records.append(
            _cdf_overlay(
                m["samples"], m["kappa"], m["alpha"], os.path.join(out_dir, "maxima_cdf.svg")
            )
        )
    return records
