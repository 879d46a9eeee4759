"""Sweep figure rendering: one SVG line chart per metric.

Empirical means are drawn as points with 1-stderr error bars, the matching
closed-form curve is overlaid as a line, and skipped (boundary) sweep values
break the line so the chart shows a gap wherever theory is undefined.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .montecarlo import METRICS, AggregateRow

AXIS_LABELS = {
    "p": "model parameters p",
    "s": "rehearsal samples s",
    "sigma": "noise level sigma",
    "theta": "task angle (degrees)",
}
METRIC_LABELS = {
    "A": "adaptation error",
    "M": "memory error",
    "G": "generalization error",
}


def render_sweep_plots(rows: list[AggregateRow], axis: str, out_stem: str) -> list[str]:
    """Write ``<out_stem>_<metric>.svg`` for each metric present in ``rows``.

    Uses the final-task rows of each axis value; the p axis is drawn on a
    log-10 scale.
    """
    values = []
    for row in rows:
        if row.axis_value not in values:
            values.append(row.axis_value)
    paths = []
    for metric in METRICS:
        picked = {}
        for row in rows:
            if row.metric != metric:
                continue
            # keep the largest task index per axis value (the final task)
            prev = picked.get(row.axis_value)
            if prev is None or row.task > prev.task:
                picked[row.axis_value] = row
        if not picked:
            continue
        xs = np.array(values, dtype=float)
        mean = np.array([_get(picked, v, "mean") for v in values], dtype=float)
        err = np.array([_get(picked, v, "stderr") for v in values], dtype=float)
        theo = np.array([_get(picked, v, "theory") for v in values], dtype=float)

        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        if np.any(np.isfinite(theo)):
            ax.plot(xs, theo, color="tab:blue", lw=1.4, label="theory")
        have = np.isfinite(mean)
        if np.any(have):
            ax.errorbar(xs[have], mean[have], yerr=err[have], fmt="x",
                        color="tab:red", ms=5, capsize=2.5, lw=1,
                        label="simulation")
        if axis == "p":
            ax.set_xscale("log", base=10)
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel(METRIC_LABELS[metric])
        ax.legend(frameon=False, fontsize=8)
        ax.grid(alpha=0.25, lw=0.5)
        fig.tight_layout()
        path = f"{out_stem}_{metric}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(path)
    return paths


def _get(picked: dict, value, field: str) -> float:
    row = picked.get(value)
    if row is None:
        return np.nan
    x = getattr(row, field)
    return np.nan if x is None else x
