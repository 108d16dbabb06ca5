"""Matrix-free conjugate gradients in a weighted inner product."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class NonConvergence(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class CGResult:
    x: np.ndarray
    residual: float
    iterations: int


def _wdot(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(w * a, b))


def weighted_cg(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    w: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    nullspace: Sequence[np.ndarray] = (),
) -> CGResult:
    """Solve ``A x = b`` for A self-adjoint and positive (semi-)definite in <.,.>_w.

    ``nullspace`` holds w-orthonormal vectors spanning ker A; they are projected
    out of the right-hand side and of every iterate (deflation), so a singular
    but consistent system converges to the solution orthogonal to the kernel.
    Convergence is declared when ``||r||_w <= tol * ||b||_w``.
    """

    def deflate(v):
        for n in nullspace:
            v = v - _wdot(w, n, v) * n
        return v

    b = deflate(b)
    bnorm = np.sqrt(_wdot(w, b, b))
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0.0, 0)
    x = np.zeros_like(b) if x0 is None else deflate(np.array(x0, dtype=float))
    r = b - apply_A(x) if x0 is not None else b.copy()
    r = deflate(r)
    rr = _wdot(w, r, r)
    if np.sqrt(rr) <= tol * bnorm:
        return CGResult(x, np.sqrt(rr) / bnorm, 0)
    d = r.copy()
    for it in range(1, max_iter + 1):
        Ad = apply_A(d)
        dAd = _wdot(w, d, Ad)
        if dAd <= 0.0:
            raise NonConvergence("operator is not positive on the search direction", np.sqrt(rr) / bnorm, it)
        alpha = rr / dAd
        x += alpha * d
        r -= alpha * Ad
        if nullspace:
            r = deflate(r)
        rr_new = _wdot(w, r, r)
        if np.sqrt(rr_new) <= tol * bnorm:
            return CGResult(x, np.sqrt(rr_new) / bnorm, it)
        d = r + (rr_new / rr) * d
        rr = rr_new
    raise NonConvergence(
        f"CG did not reach tolerance {tol:g} in {max_iter} iterations", np.sqrt(rr) / bnorm, max_iter
    )
