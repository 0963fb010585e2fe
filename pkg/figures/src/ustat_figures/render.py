"""Render tail curves, Kolmogorov-distance sweeps and moment-ratio plots.

Input is one CSV produced by the simulation CLI; the declared header for the
requested kind must be present in full (empty cells mark absent limits).
Output images are deterministic for identical inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SCHEMAS = {
    "tail": ("threshold", "emp_mean", "emp_ci_lo", "emp_ci_hi",
             "gauss", "gamma", "chisq1", "wchisq"),
    "sweep": ("swept_param", "value", "gamma", "ks_gauss", "ks_gauss_sd",
              "ks_gamma", "ks_gamma_sd", "ks_chisq1", "ks_chisq1_sd",
              "rho_d", "regime"),
    "ratios": ("d", "ratio_cond", "ratio_full"),
}

_STRING_COLUMNS = {"swept_param", "regime"}

# fixed legend vocabulary; the exact weighted chi-square sum shares the
# single-chi-square label (both render the degenerate chi-square limit)
LIMIT_LABELS = {
    "gauss": "Non-degen.",
    "gamma": "Degen. Gamma",
    "chisq1": "Degen. Chi-square",
    "wchisq": "Degen. Chi-square",
}
_LIMIT_STYLES = {
    "gauss": ("C1", "--"),
    "gamma": ("C2", "-."),
    "chisq1": ("C3", ":"),
    "wchisq": ("C4", ":"),
}
_SWEEP_SERIES = (("ks_gauss", "Non-degen.", "C1"),
                 ("ks_gamma", "Degen. Gamma", "C2"),
                 ("ks_chisq1", "Degen. Chi-square", "C3"))


class SchemaError(ValueError):
    """The CSV header lacks a column the requested kind declares."""

    def __init__(self, column: str, path):
        super().__init__(f"missing column {column!r} in {path}")
        self.column = column


@dataclass(frozen=True)
class FigureJob:
    src: Path
    kind: str
    out: Path
    logx: bool = False

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ValueError(f"kind: must be one of {sorted(SCHEMAS)}, got {self.kind!r}")


def load_columns(path, kind: str) -> Dict[str, np.ndarray]:
    """Declared columns as float arrays (empty cells -> nan), strings kept as-is."""
    if kind not in SCHEMAS:
        raise ValueError(f"kind: must be one of {sorted(SCHEMAS)}, got {kind!r}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in SCHEMAS[kind]:
            if col not in header:
                raise SchemaError(col, path)
        rows: List[dict] = list(reader)
    out: Dict[str, np.ndarray] = {}
    for col in SCHEMAS[kind]:
        cells = [row[col] for row in rows]
        if col in _STRING_COLUMNS:
            out[col] = np.array(cells, dtype=object)
        else:
            out[col] = np.array([float(c) if c not in ("", None) else np.nan for c in cells])
    return out


def _plot_tail(ax, cols, logx: bool) -> None:
    t = cols["threshold"]
    ax.fill_between(t, cols["emp_ci_lo"], cols["emp_ci_hi"],
                    color="C0", alpha=0.25, linewidth=0)
    ax.plot(t, cols["emp_mean"], color="C0", label="Empirical")
    for name in ("gauss", "gamma", "chisq1", "wchisq"):
        y = cols[name]
        if np.isfinite(y).any():
            color, style = _LIMIT_STYLES[name]
            ax.plot(t, y, color=color, linestyle=style, label=LIMIT_LABELS[name])
    ax.set_xlabel("threshold t")
    ax.set_ylabel("P(D_n > t)")
    ax.set_ylim(-0.02, 1.02)
    if logx:
        ax.set_xscale("log")


def _plot_sweep(ax, cols, logx: bool) -> None:
    x = cols["value"]
    for name, label, color in _SWEEP_SERIES:
        y = cols[name]
        if not np.isfinite(y).any():
            continue
        ax.plot(x, y, color=color, marker="o", label=label)
        sd = cols[name + "_sd"]
        if np.isfinite(sd).any():
            sd = np.where(np.isfinite(sd), sd, 0.0)
            ax.fill_between(x, y - sd, y + sd, color=color, alpha=0.2, linewidth=0)
    swept = cols["swept_param"]
    ax.set_xlabel(str(swept[0]) if swept.size else "value")
    ax.set_ylabel("Kolmogorov distance")
    if logx:
        ax.set_xscale("log")


def _plot_ratios(ax, cols, logx: bool) -> None:
    d = cols["d"]
    ax.plot(d, cols["ratio_cond"], color="C0", marker="o",
            label=r"$M_{\mathrm{cond},3}/\sigma_{\mathrm{cond}}$")
    ax.plot(d, cols["ratio_full"], color="C1", marker="s",
            label=r"$M_{\mathrm{full},3}/\sigma_{\mathrm{full}}$")
    ax.set_xlabel("d")
    ax.set_ylabel("third-moment ratio")
    if logx:
        ax.set_xscale("log")


def render(job: FigureJob) -> None:
    """Draw the figure for job.src and write it to job.out."""
    cols = load_columns(job.src, job.kind)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        if job.kind == "tail":
            _plot_tail(ax, cols, job.logx)
        elif job.kind == "sweep":
            _plot_sweep(ax, cols, job.logx)
        else:
            _plot_ratios(ax, cols, job.logx)
        handles, _ = ax.get_legend_handles_labels()
        if handles:
            ax.legend(frameon=False)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(job.out, dpi=150)
    finally:
        plt.close(fig)
