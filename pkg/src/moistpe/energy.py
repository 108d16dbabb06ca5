"""Energy norms, functionals and balance residuals.

Gradient-type integrals are edge sums: the squared forward difference on each
grid edge, weighted by the edge length along the differentiated axis and by
the trapezoid weights across the others. This is exactly the quadratic form
of the compact diffusion stencil with reflection/Robin ghosts, so
``<L u, u> = ||u||_V^2`` holds to round-off and both Poincare inequalities
hold on the grid without a discretization slack.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .dynamics import buoyancy_gradient, diffusion_L1, diffusion_L2, diffusion_L3
from .grid import BC, Grid, PhysParams, State, field_bcs, inner, overbar, vertical_integral, with_ghosts
from .hydrostatics import split_barotropic
from .stencils import ddz, divergence


def edge_sq(f: np.ndarray, axis: int, g: Grid) -> float:
    """Edge-sum approximation of the integral of (d f / d axis)^2 (2D or 3D)."""
    h = (g.hx, g.hy, g.hz)[axis]
    d = np.diff(f, axis=axis) / h
    w = np.array(h)
    for other in range(f.ndim):
        if other != axis:
            shape = [1] * f.ndim
            shape[other] = f.shape[other]
            w = w * g.trapezoid_weights("xyz"[other]).reshape(shape)
    return float(np.sum(w * d * d))


def l2_sq(f: np.ndarray, g: Grid) -> float:
    return float(np.sum(g.w3 * f * f))


def lp_norm(f: np.ndarray, g: Grid, p: float = 6.0) -> float:
    return float(np.sum(g.w3 * np.abs(f) ** p) ** (1.0 / p))


def top_lp_norm(f: np.ndarray, g: Grid, p: float = 2.0) -> float:
    """L^p norm of the top-level (z = 1) trace over the horizontal domain."""
    return float(np.sum(g.w2 * np.abs(f[..., -1]) ** p) ** (1.0 / p))


def v_norm_parts(s: State, p: PhysParams, g: Grid) -> tuple[float, float, float]:
    """Squared V-norms (velocity, temperature, moisture)."""
    vel = sum(
        edge_sq(c, 0, g) / p.Re1 + edge_sq(c, 1, g) / p.Re1 + edge_sq(c, 2, g) / p.Re2 for c in (s.v1, s.v2)
    )
    temp = (edge_sq(s.T, 0, g) + edge_sq(s.T, 1, g)) / p.Rt1 + edge_sq(s.T, 2, g) / p.Rt2 \
        + p.alpha * top_lp_norm(s.T, g) ** 2
    moist = (edge_sq(s.q, 0, g) + edge_sq(s.q, 1, g)) / p.Rt3 + edge_sq(s.q, 2, g) / p.Rt4 \
        + p.beta * top_lp_norm(s.q, g) ** 2
    return vel, temp, moist


def norm_V(s: State, p: PhysParams, g: Grid) -> float:
    a, b, c = v_norm_parts(s, p, g)
    return math.sqrt(a + b + c)


def norm_H(s: State, g: Grid) -> float:
    return math.sqrt(sum(l2_sq(f, g) for f in s.fields()))


def h2_surrogate(s: State, p: PhysParams, g: Grid) -> float:
    """sqrt(||L1 v||^2 + ||L2 T||^2 + ||L3 q||^2)."""
    L1a, L1b = diffusion_L1(s.v1, s.v2, p, g)
    return math.sqrt(l2_sq(L1a, g) + l2_sq(L1b, g) + l2_sq(diffusion_L2(s.T, p, g), g)
                     + l2_sq(diffusion_L3(s.q, p, g), g))


def poincare_constant_velocity(p: PhysParams, g: Grid) -> float:
    """Best constant C with ||v||_2^2 <= C ||v||^2 on the grid.

    The smallest eigenvalue of the velocity quadratic form comes from the
    Dirichlet direction of each component (wall-normal), the others admit
    constants.
    """
    lam1 = (4.0 / g.hx ** 2) * math.sin(math.pi * g.hx / (2 * g.lx)) ** 2 / p.Re1
    lam2 = (4.0 / g.hy ** 2) * math.sin(math.pi * g.hy / (2 * g.ly)) ** 2 / p.Re1
    return 1.0 / min(lam1, lam2)


def _z_derivative(f: np.ndarray, bc: BC, g: Grid) -> np.ndarray:
    return ddz(with_ghosts(f, bc, g.hz), g.hz)


@dataclass(frozen=True)
class EnergyReport:
    """Norm ladder and balance residuals at one instant.

    ``*_sq`` entries are squared norms; the rest are norms. Balance residuals
    needing a time derivative are NaN when no previous snapshot is supplied.
    """

    time: float
    l2_v: float
    l2_T: float
    l2_q: float
    H_sq: float
    V_v_sq: float
    V_T_sq: float
    V_q_sq: float
    V_sq: float
    l6_q: float
    l6_T: float
    l6_vtilde: float
    l6_vz: float
    l6_Tz: float
    l6_qz: float
    l2_vz: float
    l2_Tz: float
    l2_qz: float
    top_l2_q: float
    top_l2_T: float
    top_l6_q: float
    top_l6_T: float
    grad_v: float
    grad_T: float
    grad_q: float
    grad_vbar: float
    h2_v: float
    h2_T: float
    h2_q: float
    dt_v: float
    dt_T: float
    dt_q: float
    work_Q1: float
    work_Q2: float
    r_q: float
    r_vT: float
    r_poincare_q: float
    r_poincare_vT: float

    @property
    def norm_H(self) -> float:
        return math.sqrt(self.H_sq)

    @property
    def norm_V(self) -> float:
        return math.sqrt(self.V_sq)

    def row(self) -> tuple[float, ...]:
        return astuple(self)


CSV_COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(EnergyReport))


def report(
    s: State,
    s_prev: State | None,
    p: PhysParams,
    g: Grid,
    forcing=None,
) -> EnergyReport:
    """Compute the full :class:`EnergyReport` of ``s``.

    ``forcing`` is ``(F1, F2, Q1, Q2)`` (entries may be None). With ``s_prev``
    the time-derivative norms and the one-sided balance residuals use the
    backward difference over ``s.time - s_prev.time``.
    """
    bcs = field_bcs(p)
    l2v_sq = l2_sq(s.v1, g) + l2_sq(s.v2, g)
    l2T_sq, l2q_sq = l2_sq(s.T, g), l2_sq(s.q, g)
    Vv, VT, Vq = v_norm_parts(s, p, g)

    (vb1, vb2), (vt1, vt2) = split_barotropic(s, g)
    v1z, v2z = _z_derivative(s.v1, bcs["v1"], g), _z_derivative(s.v2, bcs["v2"], g)
    Tz, qz = _z_derivative(s.T, bcs["T"], g), _z_derivative(s.q, bcs["q"], g)

    def h2d_sq(f):
        return edge_sq(f, 0, g) + edge_sq(f, 1, g)

    L1a, L1b = diffusion_L1(s.v1, s.v2, p, g)
    L2T, L3q = diffusion_L2(s.T, p, g), diffusion_L3(s.q, p, g)

    Q1 = Q2 = None
    if forcing is not None:
        Q1, Q2 = forcing[2], forcing[3]
    work1 = inner(Q1, s.T, g) if Q1 is not None else 0.0
    work2 = inner(Q2, s.q, g) if Q2 is not None else 0.0

    nan = float("nan")
    dtv = dtT = dtq = r_q = r_vT = nan
    if s_prev is not None and s.time != s_prev.time:
        dt = s.time - s_prev.time
        dtv = math.sqrt(l2_sq(s.v1 - s_prev.v1, g) + l2_sq(s.v2 - s_prev.v2, g)) / dt
        dtT = math.sqrt(l2_sq(s.T - s_prev.T, g)) / dt
        dtq = math.sqrt(l2_sq(s.q - s_prev.q, g)) / dt
        dq_energy = 0.5 * (l2q_sq - l2_sq(s_prev.q, g)) / dt
        r_q = abs(dq_energy + Vq - work2)
        prev_vT = l2_sq(s_prev.v1, g) + l2_sq(s_prev.v2, g) + l2_sq(s_prev.T, g)
        r_vT = abs(0.5 * (l2v_sq + l2T_sq - prev_vT) / dt + Vv + VT - work1)

    cq = 2 * p.Rt4 + 2 / p.beta
    cT = 2 * p.Rt2 + 2 / p.alpha
    cm = poincare_constant_velocity(p, g)
    return EnergyReport(
        time=s.time,
        l2_v=math.sqrt(l2v_sq),
        l2_T=math.sqrt(l2T_sq),
        l2_q=math.sqrt(l2q_sq),
        H_sq=l2v_sq + l2T_sq + l2q_sq,
        V_v_sq=Vv,
        V_T_sq=VT,
        V_q_sq=Vq,
        V_sq=Vv + VT + Vq,
        l6_q=lp_norm(s.q, g),
        l6_T=lp_norm(s.T, g),
        l6_vtilde=lp_norm(np.hypot(vt1, vt2), g),
        l6_vz=lp_norm(np.hypot(v1z, v2z), g),
        l6_Tz=lp_norm(Tz, g),
        l6_qz=lp_norm(qz, g),
        l2_vz=math.sqrt(edge_sq(s.v1, 2, g) + edge_sq(s.v2, 2, g)),
        l2_Tz=math.sqrt(edge_sq(s.T, 2, g)),
        l2_qz=math.sqrt(edge_sq(s.q, 2, g)),
        top_l2_q=top_lp_norm(s.q, g, 2),
        top_l2_T=top_lp_norm(s.T, g, 2),
        top_l6_q=top_lp_norm(s.q, g, 6),
        top_l6_T=top_lp_norm(s.T, g, 6),
        grad_v=math.sqrt(h2d_sq(s.v1) + h2d_sq(s.v2)),
        grad_T=math.sqrt(h2d_sq(s.T)),
        grad_q=math.sqrt(h2d_sq(s.q)),
        grad_vbar=math.sqrt(edge_sq(vb1, 0, g) + edge_sq(vb1, 1, g) + edge_sq(vb2, 0, g) + edge_sq(vb2, 1, g)),
        h2_v=math.sqrt(l2_sq(L1a, g) + l2_sq(L1b, g)),
        h2_T=math.sqrt(l2_sq(L2T, g)),
        h2_q=math.sqrt(l2_sq(L3q, g)),
        dt_v=dtv,
        dt_T=dtT,
        dt_q=dtq,
        work_Q1=work1,
        work_Q2=work2,
        r_q=r_q,
        r_vT=r_vT,
        r_poincare_q=Vq - l2q_sq / cq,
        r_poincare_vT=Vv + VT - l2v_sq / cm - l2T_sq / cT,
    )


def check_q_balance(history: Sequence[EnergyReport]) -> np.ndarray:
    """Residual of the moisture energy balance with centred time differences.

    Entry n (for interior snapshots) is
    |d/dt(0.5 ||q||_2^2) + ||q||^2 - <Q2, q>| at snapshot n+1. Snapshots need
    not be uniformly spaced. Fewer than three reports give an empty series.
    """
    if len(history) < 3:
        return np.zeros(0)
    t = np.array([r.time for r in history])
    e = 0.5 * np.array([r.l2_q ** 2 for r in history])
    diss = np.array([r.V_q_sq for r in history])
    work = np.array([r.work_Q2 for r in history])
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    return np.abs(dedt + diss[1:-1] - work[1:-1])


def check_buoyancy_identity(s: State, p: PhysParams, g: Grid) -> float:
    """Relative mismatch between the work of the buoyancy term on v and the
    thermodynamic coupling term on T.

    The two cancel exactly when the barotropic constraint holds; the result
    grows linearly with any violation.
    """
    b1, b2 = buoyancy_gradient(s, p, g)
    lhs = inner(b1, s.v1, g) + inner(b2, s.v2, g)
    column_div = vertical_integral(divergence(s.v1, s.v2, g), g)
    rhs = inner(p.buoyancy_profile(g) * (1.0 + p.a * s.q) * column_div, s.T, g)
    return abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


def barotropic_violation(s: State, g: Grid) -> float:
    """Relative L2(M) norm of the divergence of the column-mean velocity.

    The scale is the size of the two terms whose cancellation the constraint
    demands, so the value is 0 for a constrained state and O(1) for a generic one.
    """
    vb1, vb2 = overbar(s.v1, g), overbar(s.v2, g)
    d = divergence(vb1, vb2, g)
    zero = np.zeros_like(vb1)
    t1, t2 = divergence(vb1, zero, g), divergence(zero, vb2, g)

    def m(f):
        return math.sqrt(float(np.sum(g.w2 * f * f)))

    scale = m(t1) + m(t2)
    return m(d) / scale if scale > 0 else 0.0


def write_csv(path, reports: Iterable[EnergyReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow([repr(float(x)) for x in r.row()])


def read_csv(path) -> list[EnergyReport]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: energy CSV header does not match the expected columns")
    return [EnergyReport(*(float(x) for x in row)) for row in rows[1:]]
