"""Figure rendering for the command-line reports.

Every curve-producing command writes a PNG next to its CSV unless plotting
is disabled.  Figures are plain matplotlib, rendered off-screen.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .rates import RateCurve  # noqa: E402
from .walks import LengthDistribution, TrajectoryStats  # noqa: E402


def _finite(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def plot_distribution(dist: LengthDistribution, path: str, title: str = "") -> None:
    ks = sorted(dist.mass)
    ps = [dist.mass[k] for k in ks]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(ks, ps, width=0.9, color="#4878d0")
    ax.set_xlabel("word length")
    ax.set_ylabel("probability")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_counts(stats: TrajectoryStats, path: str, title: str = "") -> None:
    ks = sorted(stats.counts)
    cs = [stats.counts[k] for k in ks]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(ks, cs, width=0.9, color="#6acc64")
    ax.set_xlabel("word length")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rate_curves(
    curves: dict[str, RateCurve], path: str, title: str = "", ylim: Optional[float] = None
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in curves.items():
        xs, ys = _finite(curve.xs, curve.values)
        style = "--" if "closed" in name else "-"
        ax.plot(xs, ys, style, marker=".", label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("rate")
    if ylim is not None:
        ax.set_ylim(0, ylim)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_mgf(zs: Sequence[float], lowers, uppers, path: str, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(zs, lowers, uppers, alpha=0.3, color="#d65f5f")
    ax.plot(zs, uppers, color="#d65f5f", lw=1)
    ax.set_xlabel("z")
    ax.set_ylabel("scaled log-MGF")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
