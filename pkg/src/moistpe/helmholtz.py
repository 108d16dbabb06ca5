"""Direct tensor-product solver for the implicit diffusion systems.

The operator I + c L with L = -(kh Lap_h + kz d2z) is a sum of one-dimensional
second-difference matrices, each self-adjoint in its trapezoid weights. A
generalized eigendecomposition per axis diagonalizes the whole system, so one
solve costs a few small tensor contractions.

Axes with odd parity (the wall-normal velocity direction) use the Dirichlet
block on the interior nodes; the wall nodes of the solution are zero.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.linalg import eigh

from .grid import BC, Grid


def second_difference_matrix(n: int, h: float, parity: int = 1, robin: float = 0.0) -> np.ndarray:
    """Matrix of -d2 on nodes 0..n with reflection (or Robin-top) ghosts.

    ``parity=-1`` returns the (n-1)x(n-1) interior Dirichlet block.
    """
    if parity == -1:
        m = n - 1
        D = (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / (h * h)
        return D
    m = n + 1
    D = (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / (h * h)
    D[0, 1] = -2.0 / (h * h)
    D[-1, -2] = -2.0 / (h * h)
    D[-1, -1] += 2.0 * robin / h
    return D


def _weights(n: int, h: float, parity: int) -> np.ndarray:
    if parity == -1:
        return np.full(n - 1, h)
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@functools.lru_cache(maxsize=64)
def _axis_basis(n: int, h: float, parity: int, robin: float):
    """Eigenvalues, eigenvectors V and the left inverse V^T W for one axis."""
    w = _weights(n, h, parity)
    D = second_difference_matrix(n, h, parity, robin)
    lam, V = eigh(w[:, None] * D, np.diag(w))
    return lam, V, V.T * w[None, :]


def _axis_slice(parity: int) -> slice:
    return slice(1, -1) if parity == -1 else slice(None)


def helmholtz_direct(rhs: np.ndarray, bc: BC, kh: float, kz: float, c: float, g: Grid) -> np.ndarray:
    """Solve (I + c L) u = rhs exactly (to round-off)."""
    if c == 0.0:
        return rhs.copy()
    lx, Vx, Lx = _axis_basis(g.nx, g.hx, bc.x, 0.0)
    ly, Vy, Ly = _axis_basis(g.ny, g.hy, bc.y, 0.0)
    lz, Vz, Lz = _axis_basis(g.nz, g.hz, 1, float(bc.top))
    sx, sy = _axis_slice(bc.x), _axis_slice(bc.y)
    r = rhs[sx, sy, :]
    coef = np.einsum("ia,jb,kc,abc->ijk", Lx, Ly, Lz, r, optimize=True)
    denom = 1.0 + c * (kh * (lx[:, None, None] + ly[None, :, None]) + kz * lz[None, None, :])
    u_in = np.einsum("ai,bj,ck,ijk->abc", Vx, Vy, Vz, coef / denom, optimize=True)
    u = np.zeros_like(rhs)
    u[sx, sy, :] = u_in
    return u
