import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from moistpe.dynamics import diffusion_L1, diffusion_L2, diffusion_L3
from moistpe.energy import (
    CSV_COLUMNS,
    barotropic_violation,
    check_buoyancy_identity,
    check_q_balance,
    edge_sq,
    inner,
    l2_sq,
    lp_norm,
    poincare_constant_velocity,
    read_csv,
    report,
    v_norm_parts,
    write_csv,
)
from moistpe.forcing import forcing_fields, random_state, robin_roots
from moistpe.grid import PhysParams, State, make_grid, zero_state
from moistpe.timestepper import StepConfig, run


def _state(g, **fields):
    z = np.zeros(g.shape)
    return State(*(fields.get(k, z) for k in State.FIELDS))


def test_zero_state_reports_zero(g8, params):
    r = report(zero_state(g8), None, params, g8)
    for name in CSV_COLUMNS:
        v = getattr(r, name)
        if name in ("dt_v", "dt_T", "dt_q", "r_q", "r_vT"):
            assert math.isnan(v)
        else:
            assert v == 0.0, name


def test_constant_temperature():
    g = make_grid(6, 8, 5, lx=2.0, ly=1.5)
    p = PhysParams(alpha=0.7)
    r = report(_state(g, T=np.ones(g.shape)), None, p, g)
    assert r.l2_T ** 2 == pytest.approx(3.0, rel=1e-14)
    assert r.V_T_sq == pytest.approx(0.7 * 3.0, rel=1e-14)
    assert r.grad_T == 0.0 and r.l2_Tz == 0.0


def _robin_q(g, p):
    # q = cos(r z) with r tan r = Rt4 beta, so it satisfies both vertical BCs
    r = robin_roots(p.Rt4 * p.beta, 1)[0]
    q = np.broadcast_to(np.cos(r * g.z), g.shape).copy()
    area = g.lx * g.ly
    l2 = area * (0.5 + math.sin(2 * r) / (4 * r))
    v = area * (r * r * (0.5 - math.sin(2 * r) / (4 * r)) / p.Rt4 + p.beta * math.cos(r) ** 2)
    return q, l2, v


def test_robin_moisture_field_matches_closed_form():
    p = PhysParams(Rt4=0.8, beta=1.5)
    errs = []
    for n in (8, 16, 32):
        g = make_grid(4, 4, n)
        q, l2, v = _robin_q(g, p)
        r = report(_state(g, q=q), None, p, g)
        errs.append(max(abs(r.l2_q ** 2 - l2) / l2, abs(r.V_q_sq - v) / v))
        assert r.h2_q == pytest.approx(math.sqrt(l2_sq(diffusion_L3(q, p, g), g)))
    assert errs[0] < 0.02
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_v_norm_is_sum_of_parts(g8, forced):
    s = random_state(g8, forced, 3, 0.3)
    r = report(s, None, forced, g8)
    a, b, c = v_norm_parts(s, forced, g8)
    assert r.V_sq == a + b + c
    assert r.H_sq == r.l2_v ** 2 + r.l2_T ** 2 + r.l2_q ** 2 or math.isclose(
        r.H_sq, r.l2_v ** 2 + r.l2_T ** 2 + r.l2_q ** 2, rel_tol=1e-15)


def test_l6_dominates_scaled_l2(g8, params):
    s = random_state(g8, params, 4)
    vol = g8.volume
    for f in s.fields():
        assert lp_norm(f, g8) >= math.sqrt(l2_sq(f, g8)) * vol ** (-1 / 3) * (1 - 1e-12)


@given(arrays(np.float64, (6, 5, 7), elements=st.floats(-1, 1)), st.floats(0.1, 5), st.floats(0.1, 5))
def test_moisture_poincare_slack_nonnegative(q, Rt4, beta):
    g = make_grid(5, 4, 6)
    p = PhysParams(Rt4=Rt4, beta=beta)
    r = report(_state(g, q=q), None, p, g)
    assert r.r_poincare_q >= -1e-12 * max(r.V_q_sq, 1e-300)


@given(arrays(np.float64, (4, 6, 6, 5), elements=st.floats(-1, 1)), st.floats(0.2, 4))
def test_velocity_temperature_poincare_slack_nonnegative(a, alpha):
    g = make_grid(5, 5, 4)
    p = PhysParams(alpha=alpha, Re1=0.7, Rt2=1.3)
    v1, v2, T, q = a
    v1[[0, -1]] = 0.0
    v2[:, [0, -1]] = 0.0
    r = report(State(v1, v2, T, q), None, p, g)
    assert r.r_poincare_vT >= -1e-12 * r.V_sq


def test_velocity_poincare_constant_is_sharp():
    g = make_grid(8, 6, 4, lx=2.0, ly=1.0)
    p = PhysParams(Re1=0.5)
    X, _, _ = g.mesh()
    v1 = np.sin(np.pi * X / g.lx)
    r = report(_state(g, v1=v1), None, p, g)
    assert abs(r.r_poincare_vT) < 1e-12 * r.V_sq


@given(st.integers(0, 10_000))
def test_quadratic_form_matches_v_norm(seed):
    g = make_grid(5, 4, 4)
    p = PhysParams(Rt2=0.6, alpha=1.7, Re2=2.0)
    s = random_state(g, p, seed, 0.5)
    rng = np.random.default_rng(seed)
    T = rng.standard_normal(g.shape)
    q = rng.standard_normal(g.shape)
    L1a, L1b = diffusion_L1(s.v1, s.v2, p, g)
    Vv, VT, Vq = v_norm_parts(s.replace(T=T, q=q), p, g)
    assert inner(L1a, s.v1, g) + inner(L1b, s.v2, g) == pytest.approx(Vv, rel=1e-10, abs=1e-12)
    assert inner(diffusion_L2(T, p, g), T, g) == pytest.approx(VT, rel=1e-10)
    assert inner(diffusion_L3(q, p, g), q, g) == pytest.approx(Vq, rel=1e-10)


def test_edge_sq_linear_profile():
    g = make_grid(4, 4, 4, lx=2.0)
    X, _, _ = g.mesh()
    assert edge_sq(3.0 * X, 0, g) == pytest.approx(9.0 * 2.0, rel=1e-14)


def test_q_balance_needs_three_reports(g8, params):
    r = report(zero_state(g8), None, params, g8)
    assert check_q_balance([r]).size == 0
    assert check_q_balance([r, r]).size == 0


def test_q_balance_shrinks_under_refinement(params):
    out = []
    for n, dt in ((8, 0.02), (16, 0.005)):
        g = make_grid(n, n, n)
        q, _, _ = _robin_q(g, params)
        X, _, _ = g.mesh()
        s = _state(g, q=q * np.cos(np.pi * X))
        hist = []
        run(s, params, g, StepConfig(dt=dt, t_end=0.4, snapshot_every=1),
            sinks=[lambda st_, k: hist.append(report(st_, None, params, g))])
        res = check_q_balance(hist)
        times = np.array([r.time for r in hist[1:-1]])
        # compare at shared times past the fast initial decay
        out.append(max(res[np.argmin(np.abs(times - t))] for t in (0.1, 0.2, 0.3)))
    assert out[0] / out[1] > 3.0


def test_q_balance_at_steady_state():
    # long run under steady moisture forcing: the time derivative vanishes,
    # leaving |dissipation - work| which the discrete steady state makes tiny
    p = PhysParams(Q2=PhysParams().Q2.__class__("bump", 1.0))
    g = make_grid(8, 8, 8)
    F = forcing_fields(p, g)
    hist = []
    cfg = StepConfig(dt=0.2, t_end=30.0, snapshot_every=10)
    run(zero_state(g), p, g, cfg, sinks=[lambda s, k: hist.append(report(s, None, p, g, F))], forcing=F)
    res = check_q_balance(hist[-5:])
    assert res.max() < 1e-6 * hist[-1].work_Q2


def test_buoyancy_identity_zero_temperature(g8, params):
    s = random_state(g8, params, 1, 0.3)
    assert check_buoyancy_identity(s.replace(T=np.zeros(g8.shape)), params, g8) == 0.0


def test_buoyancy_identity_constrained_16(params):
    g = make_grid(16, 16, 16)
    s = random_state(g, params, 6, 0.5)
    assert barotropic_violation(s, g) < 1e-10
    assert check_buoyancy_identity(s, params, g) < 1e-6


def test_buoyancy_identity_grows_linearly_with_violation(g8, params):
    s = random_state(g8, params, 7, 0.5)
    X, Y, Z = g8.mesh()
    u = np.sin(np.pi * X) * np.cos(np.pi * Y)  # barotropic, divergent, wall-compatible
    res = [check_buoyancy_identity(s.replace(v1=s.v1 + e * u), params, g8) for e in (1e-3, 2e-3, 4e-3)]
    assert res[0] > 1e-6
    assert res[1] / res[0] == pytest.approx(2.0, rel=0.05)
    assert res[2] / res[1] == pytest.approx(2.0, rel=0.05)


def test_poincare_constant_positive(g8, params):
    assert poincare_constant_velocity(params, g8) == pytest.approx(1 / math.pi ** 2, rel=0.05)


def test_csv_round_trip(tmp_path, g8, forced):
    s0 = random_state(g8, forced, 2, 0.2)
    snaps = run(s0, forced, g8, StepConfig(dt=0.02, t_end=0.2, snapshot_every=2), keep_snapshots=True).snapshots
    F = forcing_fields(forced, g8)
    reps = [report(b, a, forced, g8, F) for a, b in zip([None] + snaps[:-1], snaps)]
    path = tmp_path / "e.csv"
    write_csv(path, reps)
    back = read_csv(path)
    np.testing.assert_array_equal(np.array([r.row() for r in back]), np.array([r.row() for r in reps]))
    assert path.read_text().splitlines()[0].split(",") == list(CSV_COLUMNS)


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)
