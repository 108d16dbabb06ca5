"""Right-hand-side tendencies of the prognostic system.

Sign convention: ``diffusion_L*`` return the operators L1, L2, L3 themselves
(positive semi-definite), so they enter a tendency with a minus sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import BC, SCALAR, Grid, PhysParams, State, field_bcs, mask_walls, vertical_integral, with_ghosts
from .hydrostatics import diagnose_w
from .stencils import ddx, ddy, ddz, diffusion, gradient

Sources = Callable[[float], tuple]


@dataclass(frozen=True)
class Tendency:
    dv1: np.ndarray
    dv2: np.ndarray
    dT: np.ndarray
    dq: np.ndarray

    def fields(self):
        return (self.dv1, self.dv2, self.dT, self.dq)


def diffusion_L1(v1, v2, p: PhysParams, g: Grid):
    bcs = field_bcs(p)
    return (diffusion(v1, bcs["v1"], 1 / p.Re1, 1 / p.Re2, g),
            diffusion(v2, bcs["v2"], 1 / p.Re1, 1 / p.Re2, g))


def diffusion_L2(T, p: PhysParams, g: Grid):
    return diffusion(T, field_bcs(p)["T"], 1 / p.Rt1, 1 / p.Rt2, g)


def diffusion_L3(q, p: PhysParams, g: Grid):
    return diffusion(q, field_bcs(p)["q"], 1 / p.Rt3, 1 / p.Rt4, g)


def advect_horizontal(c: np.ndarray, v1: np.ndarray, v2: np.ndarray, g: Grid, bc: BC = SCALAR) -> np.ndarray:
    """Centred v . grad(c)."""
    a = with_ghosts(c, bc, g.hz)
    return v1 * ddx(a, g.hx) + v2 * ddy(a, g.hy)


def advect_vertical(c: np.ndarray, w: np.ndarray, g: Grid, bc: BC = SCALAR) -> np.ndarray:
    """Centred w dc/dz; the ghost layer carries the z-boundary conditions."""
    a = with_ghosts(c, bc, g.hz)
    return w * ddz(a, g.hz)


def coriolis(v1: np.ndarray, v2: np.ndarray, p: PhysParams):
    """(f/Ro) v_perp with v_perp = (-v2, v1)."""
    k = p.f / p.Ro
    return -k * v2, k * v1


def buoyancy_gradient(s: State, p: PhysParams, g: Grid):
    """int_0^z (bP/p) grad[(1 + a q) T] dzeta, gradient first, then quadrature.

    The cumulative trapezoid carries a half-cell closure on the two boundary
    levels (+hz/2 g at z = 0, -hz/2 g at z = 1). With it, the work this term
    does on any velocity obeying the barotropic constraint equals, to
    round-off, the work of the thermodynamic coupling term on T.
    """
    psi = p.buoyancy_profile(g) * (1.0 + p.a * s.q) * s.T
    gx, gy = gradient(psi, g)
    out = []
    for gc in (gx, gy):
        b = vertical_integral(gc, g)
        b[..., 0] += 0.5 * g.hz * gc[..., 0]
        b[..., -1] -= 0.5 * g.hz * gc[..., -1]
        out.append(b)
    return out[0], out[1]


def thermo_source(s: State, w: np.ndarray, p: PhysParams) -> np.ndarray:
    """Tendency contribution of the T-equation coupling term.

    The equation carries ``+(bP/p)(1 + a q) int_0^z div v`` on its left side and
    ``int_0^z div v = -w``, so the tendency gains ``(bP/p)(1 + a q) w``.
    """
    nz = s.T.shape[-1] - 1
    z = np.arange(nz + 1) / nz
    return p.b * p.P / p.pressure(z) * (1.0 + p.a * s.q) * w


def explicit_tendency(s: State, p: PhysParams, g: Grid, forcing=None, w: np.ndarray | None = None) -> Tendency:
    """All terms except diffusion and the surface-potential gradient.

    ``forcing`` is ``(F1, F2, Q1, Q2)`` with any entry possibly ``None``.
    """
    bcs = field_bcs(p)
    if w is None:
        w = diagnose_w(s, g)
    v1, v2 = s.v1, s.v2
    cor1, cor2 = coriolis(v1, v2, p)
    b1, b2 = buoyancy_gradient(s, p, g)

    dv1 = -advect_horizontal(v1, v1, v2, g, bcs["v1"]) - advect_vertical(v1, w, g, bcs["v1"]) - cor1 + b1
    dv2 = -advect_horizontal(v2, v1, v2, g, bcs["v2"]) - advect_vertical(v2, w, g, bcs["v2"]) - cor2 + b2
    dT = -advect_horizontal(s.T, v1, v2, g, bcs["T"]) - advect_vertical(s.T, w, g, bcs["T"]) + thermo_source(s, w, p)
    dq = -advect_horizontal(s.q, v1, v2, g, bcs["q"]) - advect_vertical(s.q, w, g, bcs["q"])

    if forcing is not None:
        F1, F2, Q1, Q2 = forcing
        if F1 is not None:
            dv1 = dv1 + F1
        if F2 is not None:
            dv2 = dv2 + F2
        if Q1 is not None:
            dT = dT + Q1
        if Q2 is not None:
            dq = dq + Q2
    mask_walls(dv1, dv2)
    return Tendency(dv1, dv2, dT, dq)


def diffusion_terms(s: State, p: PhysParams, g: Grid) -> Tendency:
    L1v1, L1v2 = diffusion_L1(s.v1, s.v2, p, g)
    return Tendency(L1v1, L1v2, diffusion_L2(s.T, p, g), diffusion_L3(s.q, p, g))


def assemble_tendency(s: State, p: PhysParams, g: Grid, forcing=None) -> Tendency:
    """Full tendency excluding -grad(Phi_s)."""
    e = explicit_tendency(s, p, g, forcing)
    d = diffusion_terms(s, p, g)
    dv1 = e.dv1 - d.dv1
    dv2 = e.dv2 - d.dv2
    mask_walls(dv1, dv2)
    return Tendency(dv1, dv2, e.dT - d.dT, e.dq - d.dq)
