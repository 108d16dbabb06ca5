"""Forcing presets and admissible (BC- and constraint-satisfying) initial states."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .grid import ForcingSpec, Grid, PhysParams, State, apply_boundary_conditions
from .projection import EllipticSolve, project

PRESETS = ("zero", "mode", "bump")


def evaluate_forcing(spec: ForcingSpec, g: Grid) -> np.ndarray | None:
    """Sample a forcing preset on the grid; ``None`` for the zero preset."""
    if spec.name not in PRESETS:
        raise ValueError(f"unknown forcing preset {spec.name!r}; expected one of {PRESETS}")
    if spec.name == "zero" or spec.amplitude == 0.0:
        return None
    X, Y, Z = g.mesh()
    if spec.name == "mode":
        m, n, k = spec.modes
        return spec.amplitude * (np.cos(m * np.pi * X / g.lx) * np.cos(n * np.pi * Y / g.ly)
                                 * np.cos(k * np.pi * Z))
    width = 0.15
    r2 = ((X - 0.5 * g.lx) / g.lx) ** 2 + ((Y - 0.5 * g.ly) / g.ly) ** 2 + (Z - 0.5) ** 2
    return spec.amplitude * np.exp(-r2 / (2 * width ** 2))


def forcing_fields(p: PhysParams, g: Grid):
    """(F1, F2, Q1, Q2) for the stepper; momentum is unforced."""
    return (None, None, evaluate_forcing(p.Q1, g), evaluate_forcing(p.Q2, g))


def robin_roots(gamma: float, count: int) -> np.ndarray:
    """First ``count`` roots r of r tan r = gamma (vertical Robin eigenfunctions cos(r z))."""
    roots = []
    for k in range(count):
        lo, hi = k * np.pi + 1e-12, k * np.pi + 0.5 * np.pi - 1e-12
        roots.append(brentq(lambda r: r * np.tan(r) - gamma, lo, hi))
    return np.array(roots)


def random_state(g: Grid, p: PhysParams, seed: int = 0, amplitude: float = 1.0, modes: int = 3) -> State:
    """Smooth random admissible state built from low modes that satisfy every BC.

    Each field has L2-scale about ``amplitude``; velocities are projected so the
    barotropic constraint holds.
    """
    rng = np.random.default_rng(seed)
    X, Y, Z = g.mesh()
    kx, ky = np.pi / g.lx, np.pi / g.ly
    rT = robin_roots(p.Rt2 * p.alpha, modes)
    rq = robin_roots(p.Rt4 * p.beta, modes)
    v1 = np.zeros(g.shape)
    v2 = np.zeros(g.shape)
    T = np.zeros(g.shape)
    q = np.zeros(g.shape)
    for m in range(modes):
        for n in range(modes):
            for k in range(modes):
                decay = 1.0 / (1 + m * m + n * n + k * k)
                c = rng.standard_normal(4) * decay
                v1 += c[0] * np.sin((m + 1) * kx * X) * np.cos(n * ky * Y) * np.cos(k * np.pi * Z)
                v2 += c[1] * np.cos(m * kx * X) * np.sin((n + 1) * ky * Y) * np.cos(k * np.pi * Z)
                T += c[2] * np.cos(m * kx * X) * np.cos(n * ky * Y) * np.cos(rT[k] * Z)
                q += c[3] * np.cos(m * kx * X) * np.cos(n * ky * Y) * np.cos(rq[k] * Z)
    s = State(v1, v2, T, q)
    s = admissible(s, p, g)
    scale = [amplitude / max(np.sqrt(np.sum(g.w3 * a * a) / g.volume), 1e-300) for a in s.fields()]
    vs = 0.5 * (scale[0] + scale[1])
    return State(s.v1 * vs, s.v2 * vs, s.T * scale[2], s.q * scale[3])


def admissible(s: State, p: PhysParams, g: Grid, tol: float = 1e-12) -> State:
    """Project the velocity onto the barotropic constraint and enforce v.n = 0."""
    s = apply_boundary_conditions(s, p, g)
    v1, v2, _ = project(s.v1, s.v2, 1.0, g, EllipticSolve(tolerance=tol, max_iter=10 * (g.nx + g.ny) + 200))
    return apply_boundary_conditions(s.replace(v1=v1, v2=v2), p, g)
