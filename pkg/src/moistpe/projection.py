"""Surface potential: enforce the barotropic constraint by a 2D Neumann projection."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .grid import Grid, inner2d, overbar
from .solvers import NonConvergence, weighted_cg
from .stencils import divergence, gradient

__all__ = ["EllipticSolve", "NonConvergence", "project", "solve_surface_direct", "surface_laplacian"]


@dataclass
class EllipticSolve:
    """Settings and last-solve telemetry for the surface-potential problem.

    ``method`` is ``"direct"`` (separable eigen solve) or ``"cg"``.
    """

    tolerance: float = 1e-8
    max_iter: int | None = None
    method: str = "direct"
    last_residual: float = 0.0
    last_iters: int = 0

    def iteration_cap(self, g: Grid) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return int(10 * np.sqrt(g.nx * g.ny))


def surface_laplacian(phi: np.ndarray, g: Grid) -> np.ndarray:
    """div(grad phi) with the same centred operators used for the correction."""
    gx, gy = gradient(phi, g)
    return divergence(gx, gy, g)


@functools.lru_cache(maxsize=16)
def _kernel(g: Grid) -> tuple[np.ndarray, ...]:
    """w-orthonormal basis of ker(div grad): constant and the three checkerboards."""
    i = np.arange(g.nx + 1)[:, None]
    j = np.arange(g.ny + 1)[None, :]
    vecs = []
    for mode in (np.ones((g.nx + 1, g.ny + 1)), (-1.0) ** i + 0 * j, (-1.0) ** j + 0 * i, (-1.0) ** (i + j)):
        v = mode.astype(float)
        for u in vecs:
            v = v - inner2d(u, v, g) * u
        vecs.append(v / np.sqrt(inner2d(v, v, g)))
    return tuple(vecs)


def _wide_matrix(n: int, h: float) -> np.ndarray:
    """1D matrix of -(d/dx)_odd (d/dx)_even, the factor of -div grad along one axis."""
    m = n + 1
    G = (np.eye(m, k=1) - np.eye(m, k=-1)) / (2 * h)
    G[0, :] = 0.0
    G[-1, :] = 0.0
    Dv = (np.eye(m, k=1) - np.eye(m, k=-1)) / (2 * h)
    Dv[0, 1] = 1.0 / h
    Dv[-1, -2] = -1.0 / h
    return -Dv @ G


@functools.lru_cache(maxsize=16)
def _spectral(g: Grid):
    """Per-axis generalized eigenpairs of the factors of -div grad."""
    out = []
    for n, h in ((g.nx, g.hx), (g.ny, g.hy)):
        w = np.full(n + 1, h)
        w[0] = w[-1] = 0.5 * h
        lam, V = eigh(w[:, None] * _wide_matrix(n, h), np.diag(w))
        lam[np.abs(lam) < 1e-9 * lam.max()] = 0.0
        out.append((lam, V, V.T * w[None, :]))
    return tuple(out)


def solve_surface_direct(rhs: np.ndarray, g: Grid) -> np.ndarray:
    """Minimum-norm solution of -div grad phi = rhs (kernel component removed)."""
    (lx, Vx, Lx), (ly, Vy, Ly) = _spectral(g)
    coef = Lx @ rhs @ Ly.T
    lam = lx[:, None] + ly[None, :]
    safe = np.where(lam > 0, lam, 1.0)
    coef = np.where(lam > 0, coef / safe, 0.0)
    return Vx @ coef @ Vy.T


def project(v1_star: np.ndarray, v2_star: np.ndarray, dt: float, g: Grid, es: EllipticSolve | None = None):
    """Remove the divergent part of the vertical mean of ``v_star``.

    Solves ``Lap Phi_s = div(mean v_star) / dt`` (homogeneous Neumann on dM) and
    returns ``(v1, v2, Phi_s)`` with ``v = v_star - dt grad Phi_s`` applied
    identically on every level. Phi_s has zero mean over M.
    """
    es = es or EllipticSolve()
    rhs = divergence(overbar(v1_star, g), overbar(v2_star, g), g) / dt
    if es.method == "direct":
        x = solve_surface_direct(-rhs, g)
        r = -rhs + surface_laplacian(x, g)
        for n in _kernel(g):
            r = r - inner2d(n, r, g) * n
        bnorm = np.sqrt(inner2d(rhs, rhs, g))
        es.last_residual = float(np.sqrt(inner2d(r, r, g)) / bnorm) if bnorm > 0 else 0.0
        es.last_iters = 0
        if es.last_residual > es.tolerance:
            raise NonConvergence(
                f"surface solve residual {es.last_residual:.3g} above tolerance {es.tolerance:g}",
                es.last_residual, 0,
            )
    else:
        res = weighted_cg(
            lambda x: -surface_laplacian(x, g),
            -rhs,
            g.w2,
            tol=es.tolerance,
            max_iter=es.iteration_cap(g),
            nullspace=_kernel(g),
        )
        es.last_residual, es.last_iters = res.residual, res.iterations
        x = res.x
    phi = x - np.sum(g.w2 * x) / g.volume
    gx, gy = gradient(phi, g)
    cx, cy = dt * gx, dt * gy
    return v1_star - cx[..., None], v2_star - cy[..., None], phi
