"""Deterministic SVG line charts (CSV stays the normative output)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "bil"
matplotlib.rcParams["svg.fonttype"] = "none"


def line_chart(path: str | Path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]], *,
               xlabel: str, ylabel: str, title: str = "", logx: bool = False, logy: bool = False,
               markers: bool = True) -> Path:
    """One line per entry of ``series`` (label -> (x, y)); non-positive values are dropped on log axes."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (x, y) in series.items():
        pts = [(a, b) for a, b in zip(x, y) if (not logx or a > 0) and (not logy or b > 0)]
        if not pts:
            continue
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o" if markers else None, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
