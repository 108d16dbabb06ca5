"""Matplotlib figures for run, experiment and covering outputs.

Everything renders off-screen (Agg) to files; nothing here opens a window.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .energy import EnergyReport  # noqa: E402
from .grid import Grid, State  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def energy_figure(history: Sequence[EnergyReport], path: str | os.PathLike) -> Path:
    """H and V norms plus the moisture balance residual over time."""
    t = np.array([r.time for r in history])
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.2))
        a.plot(t, [r.norm_H for r in history], label="|.|_H")
        a.plot(t, [r.norm_V for r in history], label="|.|_V")
        a.plot(t, [r.l2_q for r in history], "--", label="|q|_2")
        a.set_ylabel("norm")
        a.legend()
        rq = np.array([r.r_q for r in history])
        ok = np.isfinite(rq) & (rq > 0)
        if ok.any():
            b.semilogy(t[ok], rq[ok], label="moisture balance")
        rv = np.array([r.r_vT for r in history])
        ok = np.isfinite(rv) & (rv > 0)
        if ok.any():
            b.semilogy(t[ok], rv[ok], label="(v, T) balance")
        b.set_xlabel("t")
        b.set_ylabel("residual")
        if b.lines:
            b.legend()
        return _save(fig, path)


def state_figure(s: State, g: Grid, path: str | os.PathLike, level: int | None = None) -> Path:
    """Horizontal slices of the four prognostic fields at one z-level."""
    k = g.nz // 2 if level is None else level
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(7.0, 6.0), constrained_layout=True)
        for ax, name, f in zip(axes.flat, State.FIELDS, s.fields()):
            im = ax.pcolormesh(g.x, g.y, f[:, :, k].T, shading="auto", cmap="RdBu_r")
            ax.set_title(f"{name}, z = {g.z[k]:.3g}")
            ax.set_aspect("equal")
            ax.grid(False)
            fig.colorbar(im, ax=ax, shrink=0.8)
        fig.suptitle(f"t = {s.time:.4g}")
        return _save(fig, path)


def series_figure(series: Mapping[str, np.ndarray], path: str | os.PathLike, title: str = "",
                  logy: bool = False) -> Path:
    """Plot every ``<name>_<i>`` against ``time_<i>`` (or a shared ``time``)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        shared = series.get("time")
        for key, y in series.items():
            if key.startswith("time"):
                continue
            suffix = key.rsplit("_", 1)[-1]
            t = series.get(f"time_{suffix}", shared)
            if t is None or len(t) != len(y):
                continue
            (ax.semilogy if logy else ax.plot)(t, y, label=key)
        ax.set_xlabel("t")
        ax.set_title(title)
        if ax.lines:
            ax.legend(fontsize=7, ncol=2)
        return _save(fig, path)


def convergence_figure(resolutions: Sequence[float], errors: Sequence[float], path: str | os.PathLike,
                       order: float = 2.0, xlabel: str = "N") -> Path:
    """Log-log error ladder with a reference slope."""
    n = np.asarray(resolutions, dtype=float)
    e = np.asarray(errors, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(n, e, "o-", label="error")
        ax.loglog(n, e[0] * (n / n[0]) ** -order, "k:", label=f"slope -{order:g}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("relative error")
        ax.legend()
        return _save(fig, path)


def covering_figure(levels: Sequence[tuple[float, int]], path: str | os.PathLike, theta: float) -> Path:
    """Center counts per covering level against the radius."""
    r = np.array([lv[0] for lv in levels])
    c = np.array([lv[1] for lv in levels], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(r, c, "s-")
        ax.invert_xaxis()
        ax.set_xlabel("radius")
        ax.set_ylabel("|V_k|")
        ax.set_title(f"theta = {theta:g}")
        return _save(fig, path)
