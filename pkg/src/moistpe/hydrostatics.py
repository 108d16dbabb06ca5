"""Diagnostic reconstruction of w and the geopotential, and the barotropic split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, PhysParams, State, overbar, vertical_integral
from .stencils import divergence


@dataclass(frozen=True)
class Diagnostics:
    w: np.ndarray
    Phi: np.ndarray
    v_bar: tuple[np.ndarray, np.ndarray]
    v_tilde: tuple[np.ndarray, np.ndarray]


def diagnose_w(s: State, g: Grid) -> np.ndarray:
    """w(z) = -int_0^z div v, cumulative trapezoid; w = 0 at z = 0 exactly.

    By telescoping, ``w[..., -1]`` is minus the column trapezoid of ``div v``,
    i.e. minus the divergence of the vertical mean.
    """
    return -vertical_integral(divergence(s.v1, s.v2, g), g)


def diagnose_phi(s: State, phi_s: np.ndarray, p: PhysParams, g: Grid) -> np.ndarray:
    integrand = p.buoyancy_profile(g) * (1.0 + p.a * s.q) * s.T
    return phi_s[..., None] - vertical_integral(integrand, g)


def split_barotropic(s: State, g: Grid):
    """Return ``(v_bar, v_tilde)`` as pairs of 2D and 3D arrays."""
    vb1, vb2 = overbar(s.v1, g), overbar(s.v2, g)
    return (vb1, vb2), (s.v1 - vb1[..., None], s.v2 - vb2[..., None])


def barotropic_divergence(s: State, g: Grid) -> np.ndarray:
    """Divergence of the vertical mean velocity on M (zero for admissible states)."""
    return divergence(overbar(s.v1, g), overbar(s.v2, g), g)


def diagnose(s: State, phi_s: np.ndarray, p: PhysParams, g: Grid) -> Diagnostics:
    v_bar, v_tilde = split_barotropic(s, g)
    return Diagnostics(diagnose_w(s, g), diagnose_phi(s, phi_s, p, g), v_bar, v_tilde)
