"""Figure rendering for fit, forecast, simulation and diagnostic reports.

Every CLI workflow writes its figures next to the CSV artifacts; the
renderers here work purely from the in-memory result objects so they can
also be used from the library.  Rendering is file-based (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .forecast import PredictiveSummary
from .mcmc import PosteriorDraws

FITTED_COLOR = "#2a9d8f"
FORECAST_COLOR = "#e76f51"
MEDIAN_COLOR = "#1d3557"
OBS_COLOR = "#d62828"


def _week_axis(ax, summary: PredictiveSummary) -> np.ndarray:
    x = np.arange(summary.n_weeks)
    stride = max(1, summary.n_weeks // 16)
    ax.set_xticks(x[::stride])
    ax.set_xticklabels([str(int(w)) for w in summary.week_labels[::stride]])
    ax.set_xlabel("ISO week")
    return x


def predictive_bands(summary: PredictiveSummary, observed=None, calendar=None,
                     title: str = "Weekly admissions", path=None):
    """Median line with 50%/95% bands; observed counts and holidays overlaid."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    x = _week_axis(ax, summary)
    lo95, hi95 = summary.interval(0.95)
    lo50, hi50 = summary.interval(0.50)
    for mask, color, label in (
        (~summary.forecast_mask, FITTED_COLOR, "fitted"),
        (summary.forecast_mask, FORECAST_COLOR, "forecast"),
    ):
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        # extend one week left so the band is visually continuous
        if idx[0] > 0:
            idx = np.insert(idx, 0, idx[0] - 1)
        ax.fill_between(x[idx], lo95[idx], hi95[idx], color=color, alpha=0.25,
                        linewidth=0, label=f"{label} 95%")
        ax.fill_between(x[idx], lo50[idx], hi50[idx], color=color, alpha=0.45,
                        linewidth=0)
    ax.plot(x, summary.median, color=MEDIAN_COLOR, lw=1.5, label="median")
    if observed is not None:
        observed = np.asarray(observed, dtype=float)
        present = np.isfinite(observed)
        ax.plot(x[present], observed[present], "o", ms=3.5, color=OBS_COLOR,
                label="observed")
    if calendar is not None:
        for start, end in calendar.intervals:
            for day in (start, end):
                ax.axvline(day / 7.0, color="grey", ls="--", lw=0.8, alpha=0.7)
    ax.set_ylabel("admissions per week")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def series_points(series, latent_expected=None, title: str = "Simulated series",
                  path=None):
    """Weekly counts of a (simulated) series, with the latent mean if given."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    x = np.arange(series.n_weeks)
    present = series.observed
    ax.plot(x[present], series.counts[present], "o-", ms=3.5, lw=0.8,
            color=OBS_COLOR, label="observed counts")
    if latent_expected is not None:
        ax.plot(x, latent_expected, color=MEDIAN_COLOR, lw=1.5,
                label="expected admissions")
    stride = max(1, series.n_weeks // 16)
    ax.set_xticks(x[::stride])
    ax.set_xticklabels([str(int(w)) for w in series.iso_weeks[::stride]])
    ax.set_xlabel("ISO week")
    ax.set_ylabel("admissions per week")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def trace(draws: PosteriorDraws, path=None):
    """Per-parameter trace plots, one chain per colour."""
    n = len(draws.param_names)
    fig, axes = plt.subplots(n, 1, figsize=(9, 1.6 * n), sharex=True)
    for k, (ax, name) in enumerate(zip(np.atleast_1d(axes), draws.param_names)):
        for c in range(draws.n_chains):
            ax.plot(draws.iterations, draws.draws[c, :, k], lw=0.4, alpha=0.8)
        ax.set_ylabel(name, fontsize=8)
    np.atleast_1d(axes)[-1].set_xlabel("iteration")
    fig.tight_layout()
    return _finish(fig, path)


def _finish(fig, path):
    if path is None:
        return fig
    # Pin the metadata so repeated runs produce byte-identical files.
    fig.savefig(path, dpi=120, metadata={"Software": "seeiirfit"})
    plt.close(fig)
    return None
