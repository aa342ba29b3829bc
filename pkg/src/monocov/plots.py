"""Figure output for benchmark and backtest reports.

Rendering uses the Agg backend so figures can be written headlessly;
nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_metric_boxplot", "save_rank_boxplot"]


def save_metric_boxplot(values: np.ndarray, names, path, *, ylabel: str,
                        title: str | None = None) -> None:
    """One box per column of `values`; NaN entries are dropped per box."""
    values = np.asarray(values, dtype=float)
    data = []
    for j in range(values.shape[1]):
        col = values[:, j]
        col = col[np.isfinite(col)]
        data.append(col if col.size else np.array([np.nan]))
    width = max(6.0, 1.1 * len(names))
    fig, ax = plt.subplots(figsize=(width, 4.5))
    ax.boxplot(data)
    ax.set_xticks(range(1, len(names) + 1))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rank_boxplot(ranks: np.ndarray, names, path,
                      title: str | None = None) -> None:
    """Boxplot of per-trial ranks (1 = best) for each estimator."""
    save_metric_boxplot(ranks, names, path, ylabel="rank (1 = best)",
                        title=title)
