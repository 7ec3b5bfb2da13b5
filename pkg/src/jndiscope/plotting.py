"""Headless figure rendering for report outputs.

Every helper takes plain sequences, draws one figure and writes a PNG.
Styling is deliberately minimal; the CSV series next to each figure are the
authoritative data.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def bar_shares(labels: Sequence[str], percents: Sequence[float], path, title: str = "",
               xlabel: str = "", top: int = 15) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        labels, percents = list(labels)[:top], list(percents)[:top]
        ax.bar(range(len(labels)), percents, color="tab:blue")
        ax.set_xticks(range(len(labels)), [str(l) for l in labels], rotation=45, ha="right")
        ax.set_ylabel("share (%)")
        ax.set_xlabel(xlabel)
        ax.set_title(title)
        return _save(fig, path)


def heatmap(matrix, row_labels: Sequence[str], col_labels: Sequence[str], path, title: str = "",
            xlabel: str = "", ylabel: str = "") -> Path:
    data = np.asarray(matrix, dtype=float)
    with plt.rc_context({**RC, "axes.grid": False}):
        fig, ax = plt.subplots()
        im = ax.imshow(data, cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(col_labels)), [str(c) for c in col_labels], rotation=45, ha="right")
        ax.set_yticks(range(len(row_labels)), [str(r) for r in row_labels])
        if data.size <= 100:
            for (i, j), v in np.ndenumerate(data):
                ax.text(j, i, f"{v:g}", ha="center", va="center", color="w", fontsize=7)
        fig.colorbar(im, ax=ax)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def line_series(series: Mapping[str, tuple[Sequence, Sequence]], path, title: str = "",
                xlabel: str = "", ylabel: str = "", hline: float | None = None) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for name, (x, y) in series.items():
            ax.plot(list(x), list(y), marker=".", label=str(name))
        if hline is not None:
            ax.axhline(hline, color="grey", linestyle="--", linewidth=0.8)
        if len(series) > 1:
            ax.legend()
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.autofmt_xdate()
        return _save(fig, path)


def boxplot(groups: Mapping[str, Sequence[float]], path, title: str = "", ylabel: str = "") -> Path:
    labels = [k for k, v in groups.items() if len(v)]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        if labels:
            ax.boxplot([list(groups[k]) for k in labels], whis=1.5)
            ax.set_xticks(range(1, len(labels) + 1), labels)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def fit_band(t_obs: Sequence[float], y_obs: Sequence[float], t_grid: Sequence[float],
             mean: Sequence[float], low: Sequence[float], high: Sequence[float], path,
             title: str = "", xlabel: str = "t", ylabel: str = "") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.fill_between(t_grid, low, high, alpha=0.25, color="tab:orange", label="95% band")
        ax.plot(t_grid, mean, color="tab:orange", label="fit")
        ax.plot(t_obs, y_obs, "o", color="tab:blue", label="observed")
        ax.legend()
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def scatter(x: Sequence[float], y: Sequence[float], path, title: str = "", xlabel: str = "",
            ylabel: str = "") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.scatter(list(x), list(y), s=14)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)
