"""Report figures.  matplotlib is imported lazily with the Agg backend so
the library itself never needs a display or the plotting dependency."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def history_figure(path, f: np.ndarray, best: np.ndarray, baseline: float | None = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    k = np.arange(1, len(f) + 1)
    ax.plot(k, f, "o", ms=3, color="0.6", label="evaluation")
    ax.plot(k, best, "-", color="C0", label="best so far")
    if baseline is not None:
        ax.axhline(baseline, ls="--", color="C3", lw=1, label="baseline")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("resistance [N]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def spectrum_figure(path, rows: list[dict]) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th), np.sin(th), "k-", lw=0.8)
    re = np.array([r["re"] for r in rows])
    im = np.array([r["im"] for r in rows])
    ex = np.array([r["excluded"] for r in rows], dtype=bool)
    ax.plot(re[~ex], im[~ex], "o", ms=4, color="C0", label="retained")
    if ex.any():
        ax.plot(re[ex], im[ex], "x", ms=6, color="C3", label="excluded")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def energy_figure(path, rows: list[dict]) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    k = np.array([r["mode"] for r in rows])
    s = np.array([r["sigma"] for r in rows])
    ax.semilogy(k, np.maximum(s, 1e-300), "o-", ms=3)
    r = sum(row["retained"] for row in rows)
    if r:
        ax.axvline(r + 0.5, ls="--", color="C3", lw=1, label=f"rank {r}")
        ax.legend()
    ax.set_xlabel("mode")
    ax.set_ylabel("singular value")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
