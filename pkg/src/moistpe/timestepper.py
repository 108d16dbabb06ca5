"""IMEX time stepping: explicit transport/Coriolis/buoyancy/forcing, implicit
diffusion (theta scheme), then the surface-potential projection."""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .dynamics import diffusion_terms, explicit_tendency
from .grid import BC, Grid, PhysParams, State, apply_boundary_conditions, field_bcs, with_ghosts
from .helmholtz import helmholtz_direct
from .hydrostatics import diagnose_w
from .projection import EllipticSolve, project
from .solvers import NonConvergence, weighted_cg
from .stencils import d2z, laplacian_h

log = logging.getLogger(__name__)


class CFLViolation(RuntimeError):
    def __init__(self, cfl: float, limit: float):
        super().__init__(f"advective CFL {cfl:.4g} exceeds limit {limit:.4g}; reduce dt")
        self.cfl = cfl
        self.limit = limit


class NonFinite(RuntimeError):
    def __init__(self, message: str, state: State | None = None):
        super().__init__(message)
        self.state = state


class RunAborted(RuntimeError):
    """A run stopped on a numerical error; ``time`` is the last accepted time."""

    def __init__(self, cause: Exception, time: float, state: State):
        super().__init__(f"run aborted at t={time:.6g}: {cause}")
        self.cause = cause
        self.time = time
        self.state = state


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float = 0.0
    cfl_max: float = 0.5
    theta: float = 1.0
    snapshot_every: int = 1
    diffusion_tol: float = 1e-10
    projection_tol: float = 1e-8
    solver: str = "direct"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"stepping.dt must be positive, got {self.dt!r}")
        if not 0 < self.cfl_max <= 1:
            raise ValueError(f"stepping.cfl_max must lie in (0, 1], got {self.cfl_max!r}")
        if self.theta not in (0.5, 1.0):
            raise ValueError(f"stepping.theta must be 0.5 or 1, got {self.theta!r}")
        if self.t_end < 0:
            raise ValueError(f"stepping.t_end must be >= 0, got {self.t_end!r}")
        if self.solver not in ("direct", "cg"):
            raise ValueError(f"stepping.solver must be 'direct' or 'cg', got {self.solver!r}")
        if self.snapshot_every < 1:
            raise ValueError("stepping.snapshot_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Telemetry:
    steps: int = 0
    rejections: int = 0
    wall_time: float = 0.0
    projection_iters: list[int] = field(default_factory=list)
    projection_residuals: list[float] = field(default_factory=list)
    diffusion_iters: list[int] = field(default_factory=list)


def advective_cfl(s: State, w: np.ndarray, g: Grid, dt: float) -> float:
    return float(dt * np.max(np.abs(s.v1) / g.hx + np.abs(s.v2) / g.hy + np.abs(w) / g.hz))


def helmholtz_solve(rhs, bc: BC, kh: float, kz: float, c: float, g: Grid, tol: float, x0=None):
    """Iteratively solve (I + c L) u = rhs, L = -(kh Lap_h + kz d2z) with BCs ``bc``.

    The operator is symmetric positive definite in the trapezoid inner
    product (on the subspace with zero wall values when ``bc`` is odd).
    """
    if c == 0.0:
        return rhs.copy(), 0

    def apply(u):
        a = with_ghosts(u, bc, g.hz)
        return u - c * (kh * laplacian_h(a, g) + kz * d2z(a, g.hz))

    res = weighted_cg(apply, rhs, g.w3, x0=rhs if x0 is None else x0, tol=tol, max_iter=2000)
    return res.x, res.iterations


Sources = Callable[[float], tuple]


def step(
    s: State,
    p: PhysParams,
    g: Grid,
    cfg: StepConfig,
    forcing=None,
    sources: Sources | None = None,
    telemetry: Telemetry | None = None,
) -> State:
    """Advance ``s`` by one step of length ``cfg.dt``.

    ``forcing`` holds the steady fields (F1, F2, Q1, Q2); ``sources(t)`` may add
    time-dependent ones, evaluated at ``t + theta*dt``.
    """
    dt, th = cfg.dt, cfg.theta
    w = diagnose_w(s, g)
    cfl = advective_cfl(s, w, g, dt)
    if cfl > cfg.cfl_max:
        raise CFLViolation(cfl, cfg.cfl_max)

    total = list(forcing) if forcing is not None else [None] * 4
    if sources is not None:
        extra = sources(s.time + th * dt)
        total = [a if b is None else (b if a is None else a + b) for a, b in zip(total, extra)]
    e = explicit_tendency(s, p, g, total, w=w)

    bcs = field_bcs(p)
    coeffs = {
        "v1": (1 / p.Re1, 1 / p.Re2),
        "v2": (1 / p.Re1, 1 / p.Re2),
        "T": (1 / p.Rt1, 1 / p.Rt2),
        "q": (1 / p.Rt3, 1 / p.Rt4),
    }
    explicit_diff = diffusion_terms(s, p, g).fields() if th < 1.0 else (None,) * 4
    new = {}
    for name, u, du, Lu in zip(State.FIELDS, s.fields(), e.fields(), explicit_diff):
        rhs = u + dt * du
        if Lu is not None:
            rhs = rhs - (1 - th) * dt * Lu
        kh, kz = coeffs[name]
        if cfg.solver == "direct":
            new[name], iters = helmholtz_direct(rhs, bcs[name], kh, kz, th * dt, g), 0
        else:
            new[name], iters = helmholtz_solve(rhs, bcs[name], kh, kz, th * dt, g, cfg.diffusion_tol)
        if telemetry is not None:
            telemetry.diffusion_iters.append(iters)

    es = EllipticSolve(tolerance=cfg.projection_tol, method=cfg.solver)
    v1, v2, _ = project(new["v1"], new["v2"], dt, g, es)
    if telemetry is not None:
        telemetry.projection_iters.append(es.last_iters)
        telemetry.projection_residuals.append(es.last_residual)
    out = apply_boundary_conditions(State(v1, v2, new["T"], new["q"], time=s.time + dt), p, g)
    if not out.is_finite():
        raise NonFinite(f"non-finite values after step to t={out.time:.6g}", out)
    return out


@dataclass
class RunResult:
    final: State
    telemetry: Telemetry
    snapshots: list[State] = field(default_factory=list)


def run(
    s0: State,
    p: PhysParams,
    g: Grid,
    cfg: StepConfig,
    sinks: Iterable[Callable[[State, int], None]] = (),
    forcing=None,
    sources: Sources | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Iterate :func:`step` until ``cfg.t_end``.

    Every ``snapshot_every`` steps (and at step 0) each sink is called with the
    current state and step index. Times are ``s0.time + n*dt`` (no drift).
    """
    sinks = list(sinks)
    tel = Telemetry()
    snaps: list[State] = []
    t_start = _time.perf_counter()
    s = s0
    t0 = s0.time

    def emit(state, n):
        for sink in sinks:
            sink(state, n)
        if keep_snapshots:
            snaps.append(state)

    emit(s, 0)
    for n in range(1, cfg.n_steps + 1):
        try:
            s = step(s, p, g, cfg, forcing=forcing, sources=sources, telemetry=tel)
        except (CFLViolation, NonConvergence, NonFinite) as exc:
            tel.wall_time = _time.perf_counter() - t_start
            raise RunAborted(exc, s.time, s) from exc
        s = s.replace(time=t0 + n * cfg.dt)
        tel.steps = n
        if n % cfg.snapshot_every == 0 or n == cfg.n_steps:
            emit(s, n)
    tel.wall_time = _time.perf_counter() - t_start
    log.debug("run finished: %d steps in %.2fs", tel.steps, tel.wall_time)
    return RunResult(s, tel, snaps)
