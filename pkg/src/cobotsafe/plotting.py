"""Figures for simulation traces and scenario comparisons (written to files)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .monitor import Regime  # noqa: E402

_REGIME_COLORS = {Regime.REDUCED: "#f5c542", Regime.STOPPED: "#e4572e"}


def _shade_regimes(ax, t: np.ndarray, regime: np.ndarray) -> None:
    change = np.flatnonzero(np.diff(regime)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(t) - 1]])
    for a, b in zip(starts, ends):
        color = _REGIME_COLORS.get(Regime(int(regime[a])))
        if color:
            ax.axvspan(t[a], t[b], color=color, alpha=0.3, lw=0)


def plot_trace(trace, path, title: str = "") -> Path:
    """Minimum pair distance, EE speed and joint speeds over time with regime shading."""
    path = Path(path)
    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    t = trace.t
    d = np.where(np.isinf(trace.min_pair_dist), np.nan, trace.min_pair_dist)
    axes[0].plot(t, d, lw=0.8, color="k")
    axes[0].set_ylabel("min pair dist [m]")
    axes[1].plot(t, trace.ee_speed, lw=0.8, color="tab:blue")
    axes[1].set_ylabel("EE speed [m/s]")
    axes[2].plot(t, np.abs(trace.qd), lw=0.6)
    axes[2].set_ylabel("|qd| [rad/s]")
    axes[2].set_xlabel("t [s]")
    for ax in axes:
        _shade_regimes(ax, t, trace.regime)
        ax.grid(alpha=0.3)
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_comparison(comparison, path) -> Path:
    """Bar chart of total task duration per scenario."""
    path = Path(path)
    names = [r.scenario for r in comparison.rows]
    durations = [r.duration for r in comparison.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(names, durations, color="tab:gray")
    for bar, value in zip(bars, durations):
        ax.text(bar.get_x() + bar.get_width() / 2, value, f"{value:.1f}", ha="center", va="bottom", fontsize=8)
    ax.set_xlabel("scenario")
    ax.set_ylabel("task duration [s]")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
