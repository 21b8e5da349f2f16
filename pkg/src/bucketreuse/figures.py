"""Render simulation outputs as figures next to the delimited data files.

Uses the Agg backend so runs never need a display. PNG output carries no
timestamps, so reruns with the same inputs produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulation import MetricSeries, SamplingSimResult, STRATEGIES

__all__ = ["render_program_metrics", "render_sampling_distributions"]

_PNG_METADATA = {"Software": None}  # drop the version-bearing text chunk


def render_program_metrics(series: MetricSeries, path: str | Path, title: str = "") -> Path:
    """Three stacked panels: day-one bias, availability correlation, and
    sampling correlation, each against the day index."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    panels = [
        ("Day-one effect bias", series.ate1_bias_mean, series.ate1_bias_sd),
        ("Availability correlation", series.availability_cor_mean, None),
        ("Sampling correlation", series.sampling_cor_mean, None),
    ]
    for ax, (label, mean, sd) in zip(axes, panels):
        ax.axhline(0.0, color="0.8", lw=1)
        ax.plot(series.deltas, mean, lw=1.5)
        if sd is not None:
            ax.fill_between(
                series.deltas,
                mean - sd,
                mean + sd,
                alpha=0.2,
                linewidth=0,
            )
        ax.set_ylabel(label)
    axes[-1].set_xlabel("day")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def render_sampling_distributions(result: SamplingSimResult, path: str | Path) -> Path:
    """Overlaid histograms of the estimates and the t-statistics for the two
    sampling strategies."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, getter, label in (
        (axes[0], result.flat_estimates, "difference-in-means estimate"),
        (axes[1], result.flat_t_stats, "Welch t-statistic"),
    ):
        values = {s: getter(s) for s in STRATEGIES}
        lo = min(v.min() for v in values.values())
        hi = max(v.max() for v in values.values())
        bins = np.linspace(lo, hi, 60)
        for strategy, v in values.items():
            ax.hist(v, bins=bins, density=True, histtype="step", lw=1.5, label=strategy)
        ax.set_xlabel(label)
        ax.set_ylabel("density")
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path
