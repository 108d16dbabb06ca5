"""Second-order stencils on ghost-padded node arrays.

All functions taking ``a`` expect a padded array (one ghost layer per face,
ghosts already filled) and return node-shaped results. With reflection ghosts
the centred divergence and gradient are exact negative adjoints in the
trapezoid inner product, and the compact second differences are symmetric in
it; the energy identities rely on both facts.
"""

from __future__ import annotations

import numpy as np

from .grid import BC, SCALAR, Grid, with_ghosts


def ddx(a: np.ndarray, h: float) -> np.ndarray:
    if a.ndim == 3:
        return (a[2:, 1:-1, 1:-1] - a[:-2, 1:-1, 1:-1]) / (2 * h)
    return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * h)


def ddy(a: np.ndarray, h: float) -> np.ndarray:
    if a.ndim == 3:
        return (a[1:-1, 2:, 1:-1] - a[1:-1, :-2, 1:-1]) / (2 * h)
    return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * h)


def ddz(a: np.ndarray, h: float) -> np.ndarray:
    return (a[1:-1, 1:-1, 2:] - a[1:-1, 1:-1, :-2]) / (2 * h)


def d2x(a: np.ndarray, h: float) -> np.ndarray:
    if a.ndim == 3:
        c = a[1:-1, 1:-1, 1:-1]
        return (a[2:, 1:-1, 1:-1] - 2 * c + a[:-2, 1:-1, 1:-1]) / (h * h)
    c = a[1:-1, 1:-1]
    return (a[2:, 1:-1] - 2 * c + a[:-2, 1:-1]) / (h * h)


def d2y(a: np.ndarray, h: float) -> np.ndarray:
    if a.ndim == 3:
        c = a[1:-1, 1:-1, 1:-1]
        return (a[1:-1, 2:, 1:-1] - 2 * c + a[1:-1, :-2, 1:-1]) / (h * h)
    c = a[1:-1, 1:-1]
    return (a[1:-1, 2:] - 2 * c + a[1:-1, :-2]) / (h * h)


def d2z(a: np.ndarray, h: float) -> np.ndarray:
    c = a[1:-1, 1:-1, 1:-1]
    return (a[1:-1, 1:-1, 2:] - 2 * c + a[1:-1, 1:-1, :-2]) / (h * h)


def gradient(phi: np.ndarray, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal gradient of an even (Neumann) scalar, 2D or 3D.

    The normal component vanishes on the lateral walls.
    """
    a = with_ghosts(phi, SCALAR) if phi.ndim == 2 else with_ghosts(phi, SCALAR, g.hz)
    return ddx(a, g.hx), ddy(a, g.hy)


def divergence(v1: np.ndarray, v2: np.ndarray, g: Grid) -> np.ndarray:
    """Horizontal divergence with the wall-normal velocity odd-reflected."""
    if v1.ndim == 2:
        a1 = with_ghosts(v1, BC(-1, 1))
        a2 = with_ghosts(v2, BC(1, -1))
    else:
        a1 = with_ghosts(v1, BC(-1, 1), g.hz)
        a2 = with_ghosts(v2, BC(1, -1), g.hz)
    return ddx(a1, g.hx) + ddy(a2, g.hy)


def laplacian_h(a: np.ndarray, g: Grid) -> np.ndarray:
    return d2x(a, g.hx) + d2y(a, g.hy)


def diffusion(f: np.ndarray, bc: BC, kh: float, kz: float, g: Grid) -> np.ndarray:
    """-(kh * horizontal Laplacian + kz * d2/dz2) applied with the given BCs."""
    a = with_ghosts(f, bc, g.hz)
    return -(kh * laplacian_h(a, g) + kz * d2z(a, g.hz))


def edge_diff(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Forward differences on the edges along ``axis``."""
    return np.diff(f, axis=axis) / h
