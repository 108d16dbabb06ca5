"""Manufactured solutions and convergence ladders.

The catalog solution satisfies every boundary condition and the barotropic
constraint exactly. Its source terms are derived symbolically (sympy) from the
full nonlinear system, including diagnosed w and the buoyancy integral, then
compiled to numpy callables.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .grid import Grid, PhysParams, State, make_grid
from .energy import l2_sq
from .forcing import admissible
from .timestepper import StepConfig, run


@dataclass(frozen=True)
class ManufacturedSpec:
    """Amplitudes of the catalog solution.

    v1 = e(t) sin(kx x) cos(ky y) (A1 cos(pi z) + B0 ky)
    v2 = e(t) cos(kx x) sin(ky y) (A2 cos(pi z) - B0 kx)
    T  = e(t) (T0 + T1 cos(kx x) cos(ky y)) theta_T(z)
    q  = e(t) (q0 + q1 cos(2 kx x) cos(ky y)) theta_q(z)
    with theta(z) = 1 + c z^2 chosen to satisfy the Robin condition at z = 1
    and e(t) = 1 + omega_amp sin(omega t) (steady when omega_amp = 0).
    """

    A1: float = 0.3
    A2: float = -0.2
    B0: float = 0.05
    T0: float = 0.5
    T1: float = 0.4
    q0: float = 0.3
    q1: float = 0.2
    omega: float = 2.0
    omega_amp: float = 0.0


def _robin_curvature(gamma: float) -> float:
    # theta = 1 + c z^2 with theta'(1) + gamma theta(1) = 0
    return -gamma / (2.0 + gamma)


@dataclass
class Manufactured:
    spec: ManufacturedSpec
    params: PhysParams
    lx: float
    ly: float
    exact: tuple = field(repr=False, default=())
    sources: tuple = field(repr=False, default=())

    def state(self, g: Grid, t: float) -> State:
        X, Y, Z = g.mesh()
        vals = [np.broadcast_to(np.asarray(f(X, Y, Z, t), dtype=float), g.shape).copy() for f in self.exact]
        return State(*vals, time=t)

    def source_fields(self, g: Grid, t: float):
        X, Y, Z = g.mesh()
        return tuple(np.broadcast_to(np.asarray(f(X, Y, Z, t), dtype=float), g.shape).copy()
                     for f in self.sources)


def _pressure_weighted_integral(expr, zeta, z, p: PhysParams):
    """int_0^z (bP/p(zeta)) expr dzeta for ``expr`` polynomial in zeta."""
    slope, top = sp.symbols("slope top", positive=True)
    poly = sp.Poly(expr, zeta)
    total = 0
    for (k,), c in poly.terms():
        prim = sp.integrate(zeta ** k / (slope * zeta + top), (zeta, 0, z), conds="none")
        total += c * prim.subs({slope: p.P - p.p0, top: p.p0})
    return p.b * p.P * total


@functools.lru_cache(maxsize=8)
def manufactured(spec: ManufacturedSpec, p: PhysParams, lx: float = 1.0, ly: float = 1.0) -> Manufactured:
    """Build exact-solution and source callables for ``spec`` under ``p``."""
    x, y, z, t, zeta = sp.symbols("x y z t zeta", real=True)
    kx, ky = sp.pi / sp.nsimplify(lx), sp.pi / sp.nsimplify(ly)
    e = 1 + sp.Float(spec.omega_amp) * sp.sin(sp.Float(spec.omega) * t)
    cT = sp.Float(_robin_curvature(p.Rt2 * p.alpha))
    cq = sp.Float(_robin_curvature(p.Rt4 * p.beta))

    v1 = e * sp.sin(kx * x) * sp.cos(ky * y) * (spec.A1 * sp.cos(sp.pi * z) + spec.B0 * ky)
    v2 = e * sp.cos(kx * x) * sp.sin(ky * y) * (spec.A2 * sp.cos(sp.pi * z) - spec.B0 * kx)
    T = e * (spec.T0 + spec.T1 * sp.cos(kx * x) * sp.cos(ky * y)) * (1 + cT * z ** 2)
    q = e * (spec.q0 + spec.q1 * sp.cos(2 * kx * x) * sp.cos(ky * y)) * (1 + cq * z ** 2)

    div = sp.diff(v1, x) + sp.diff(v2, y)
    w = -sp.integrate(div.subs(z, zeta), (zeta, 0, z))
    moist_T = sp.expand(((1 + p.a * q) * T).subs(z, zeta))
    B1 = _pressure_weighted_integral(sp.diff(moist_T, x), zeta, z, p)
    B2 = _pressure_weighted_integral(sp.diff(moist_T, y), zeta, z, p)
    k = p.f / p.Ro

    def transport(c):
        return v1 * sp.diff(c, x) + v2 * sp.diff(c, y) + w * sp.diff(c, z)

    def diff_op(c, kh, kz):
        return -(kh * (sp.diff(c, x, 2) + sp.diff(c, y, 2)) + kz * sp.diff(c, z, 2))

    F1 = sp.diff(v1, t) + transport(v1) - k * v2 - B1 + diff_op(v1, 1 / p.Re1, 1 / p.Re2)
    F2 = sp.diff(v2, t) + transport(v2) + k * v1 - B2 + diff_op(v2, 1 / p.Re1, 1 / p.Re2)
    thermo = p.b * p.P / ((p.P - p.p0) * z + p.p0) * (1 + p.a * q) * w
    Q1 = sp.diff(T, t) + transport(T) - thermo + diff_op(T, 1 / p.Rt1, 1 / p.Rt2)
    Q2 = sp.diff(q, t) + transport(q) + diff_op(q, 1 / p.Rt3, 1 / p.Rt4)

    args = (x, y, z, t)
    exact = tuple(sp.lambdify(args, f, "numpy") for f in (v1, v2, T, q))
    sources = tuple(sp.lambdify(args, f, "numpy") for f in (F1, F2, Q1, Q2))
    return Manufactured(spec, p, lx, ly, exact, sources)


def relative_error(a: State, b: State, g: Grid) -> float:
    num = sum(l2_sq(x - y, g) for x, y in zip(a.fields(), b.fields()))
    den = sum(l2_sq(y, g) for y in b.fields())
    return math.sqrt(num / den)


def solve_manufactured(m: Manufactured, g: Grid, cfg: StepConfig) -> State:
    """Integrate from the (projected) exact initial state to ``cfg.t_end``."""
    p = m.params
    s0 = admissible(m.state(g, 0.0), p, g)
    if m.spec.omega_amp == 0.0:
        res = run(s0, p, g, cfg, forcing=m.source_fields(g, 0.0))
    else:
        res = run(s0, p, g, cfg, sources=lambda tt: m.source_fields(g, tt))
    return res.final


@dataclass
class ConvergenceTable:
    resolutions: list[int]
    errors: list[float]
    orders: list[float]

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")


def observed_orders(errors, ratio: float = 2.0) -> list[float]:
    return [math.log(errors[i] / errors[i + 1]) / math.log(ratio) for i in range(len(errors) - 1)]


def spatial_ladder(
    p: PhysParams | None = None,
    sizes=(8, 16, 32),
    t_end: float = 0.2,
    cfl_dt: float = 0.1,
    spec: ManufacturedSpec | None = None,
) -> ConvergenceTable:
    """Errors of the steady manufactured solution on a refinement ladder.

    ``dt = cfl_dt * h`` keeps the advective CFL fixed; with a steady solution
    backward Euler carries no time truncation error.
    """
    p = p or PhysParams()
    spec = spec or ManufacturedSpec()
    m = manufactured(spec, p)
    errs = []
    for n in sizes:
        g = make_grid(n, n, n)
        dt = cfl_dt / n
        cfg = StepConfig(dt=dt, t_end=round(t_end / dt) * dt)
        final = solve_manufactured(m, g, cfg)
        errs.append(relative_error(final, m.state(g, final.time), g))
    return ConvergenceTable(list(sizes), errs, observed_orders(errs))


def temporal_ladder(
    p: PhysParams | None = None,
    n: int = 16,
    dts=(0.01, 0.005, 0.0025),
    t_end: float = 0.5,
    spec: ManufacturedSpec | None = None,
) -> ConvergenceTable:
    """Self-convergence of the time-dependent manufactured solution.

    On a fixed grid the spatial error is common to all runs, so differences of
    successive dt levels isolate the time discretization error.
    """
    p = p or PhysParams()
    spec = spec or ManufacturedSpec(omega_amp=0.5)
    m = manufactured(spec, p)
    g = make_grid(n, n, n)
    finals = [solve_manufactured(m, g, StepConfig(dt=dt, t_end=t_end)) for dt in dts]
    diffs = [relative_error(finals[i], finals[i + 1], g) for i in range(len(finals) - 1)]
    ratio = dts[0] / dts[1]
    return ConvergenceTable([int(round(t_end / dt)) for dt in dts], diffs, observed_orders(diffs, ratio))
