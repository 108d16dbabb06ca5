import numpy as np
import pytest
from scipy.linalg import eigh

from moistpe.dynamics import diffusion_L3
from moistpe.forcing import forcing_fields, random_state
from moistpe.grid import PhysParams, State, make_grid, onesided_bc_residuals, zero_state
from moistpe.energy import barotropic_violation, l2_sq
from moistpe.timestepper import CFLViolation, NonFinite, RunAborted, StepConfig, run, step


def test_stepconfig_validation():
    for bad in ({"dt": 0.0}, {"dt": 0.1, "cfl_max": 1.5}, {"dt": 0.1, "theta": 0.3},
                {"dt": 0.1, "t_end": -1}, {"dt": 0.1, "solver": "lu"}, {"dt": 0.1, "snapshot_every": 0}):
        with pytest.raises(ValueError):
            StepConfig(**bad)
    assert StepConfig(dt=0.1, t_end=1.0).n_steps == 10


def test_zero_state_is_fixed_point(g8, params):
    res = run(zero_state(g8), params, g8, StepConfig(dt=0.05, t_end=0.5))
    assert all(np.all(a == 0.0) for a in res.final.fields())


def test_run_with_zero_duration(g8, params):
    s0 = random_state(g8, params, 1, 0.2)
    res = run(s0, params, g8, StepConfig(dt=0.1, t_end=0.0))
    assert res.final is s0 and res.telemetry.steps == 0


def test_run_takes_exact_step_count(g8, params):
    seen = []
    res = run(random_state(g8, params, 1, 0.2), params, g8, StepConfig(dt=0.01, t_end=0.1, snapshot_every=3),
              sinks=[lambda s, n: seen.append(n)])
    assert res.telemetry.steps == 10
    assert seen == [0, 3, 6, 9, 10]
    assert res.final.time == pytest.approx(0.1, abs=1e-15)


def test_moisture_only_dynamics_dissipate(g8, params):
    s = random_state(g8, params, 2, 0.2)
    s = State(np.zeros(g8.shape), np.zeros(g8.shape), np.zeros(g8.shape), s.q)
    norms = [l2_sq(s.q, g8)]
    cfg = StepConfig(dt=0.05)
    for _ in range(20):
        s = step(s, params, g8, cfg)
        norms.append(l2_sq(s.q, g8))
        assert np.all(s.v1 == 0.0) and np.all(s.v2 == 0.0)
    assert all(b <= a for a, b in zip(norms, norms[1:]))


def test_moisture_operator_spectrum_is_nonnegative(params):
    # dense check at 8^3: W^(1/2) L3 W^(-1/2) is symmetric with eigenvalues >= 0,
    # so every implicit step contracts the weighted norm
    g = make_grid(8, 8, 8)
    n = int(np.prod(g.shape))
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols.append(diffusion_L3(e.reshape(g.shape), params, g).ravel())
    L = np.array(cols).T
    w = g.w3.ravel()
    S = np.sqrt(w)[:, None] * L / np.sqrt(w)[None, :]
    assert np.abs(S - S.T).max() < 1e-9 * np.abs(S).max()
    lam = eigh(0.5 * (S + S.T), eigvals_only=True)
    assert lam.min() > -1e-9
    dt = 0.1
    assert np.all(1.0 / (1.0 + dt * lam) <= 1.0 + 1e-12)


@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_pure_diffusion_is_dissipative(theta, g8):
    p = PhysParams(f=0.0, b=1e-12)
    s = random_state(g8, p, 4, 0.01)
    s = s.replace(v1=np.zeros(g8.shape), v2=np.zeros(g8.shape))
    cfg = StepConfig(dt=0.5, theta=theta)
    for _ in range(5):
        nxt = step(s, p, g8, cfg)
        for a, b in zip(s.fields(), nxt.fields()):
            assert l2_sq(b, g8) <= l2_sq(a, g8) * (1 + 1e-12) + 1e-24
        s = nxt


def test_steps_preserve_invariants(g8, forced):
    s = random_state(g8, forced, 5, 0.2)
    cfg = StepConfig(dt=0.02)
    F = forcing_fields(forced, g8)
    for _ in range(10):
        s = step(s, forced, g8, cfg, forcing=F)
        assert barotropic_violation(s, g8) < 1e-8
        assert np.all(s.v1[[0, -1]] == 0.0) and np.all(s.v2[:, [0, -1]] == 0.0)
    # one-sided boundary residuals are discretization-sized, not O(1)
    assert max(onesided_bc_residuals(s, forced, g8).values()) < 0.5


def test_determinism_bitwise(g8, forced):
    cfg = StepConfig(dt=0.02, t_end=0.3, snapshot_every=5)
    a = run(random_state(g8, forced, 9, 0.2), forced, g8, cfg, keep_snapshots=True, forcing=forcing_fields(forced, g8))
    b = run(random_state(g8, forced, 9, 0.2), forced, g8, cfg, keep_snapshots=True, forcing=forcing_fields(forced, g8))
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert sa.to_vector().tobytes() == sb.to_vector().tobytes()


def test_direct_and_cg_runs_agree(g8, forced):
    F = forcing_fields(forced, g8)
    s0 = random_state(g8, forced, 11, 0.2)
    a = run(s0, forced, g8, StepConfig(dt=0.02, t_end=0.1, solver="direct"), forcing=F).final
    b = run(s0, forced, g8, StepConfig(dt=0.02, t_end=0.1, solver="cg", diffusion_tol=1e-13,
                                       projection_tol=1e-12), forcing=F).final
    np.testing.assert_allclose(a.to_vector(), b.to_vector(), atol=1e-9)


def test_cfl_violation(g8, params):
    s = random_state(g8, params, 0, 50.0)
    with pytest.raises(CFLViolation):
        step(s, params, g8, StepConfig(dt=0.1))
    with pytest.raises(RunAborted) as info:
        run(s, params, g8, StepConfig(dt=0.1, t_end=1.0))
    assert isinstance(info.value.cause, CFLViolation)
    assert info.value.time == 0.0


def test_nonfinite_aborts(g8, params):
    s = zero_state(g8)
    bad = np.zeros(g8.shape)
    bad[3, 3, 3] = np.nan
    with pytest.raises((NonFinite, Exception)):
        step(s.replace(T=bad), params, g8, StepConfig(dt=0.1))


def test_time_dependent_sources_are_sampled(g8, params):
    calls = []

    def sources(t):
        calls.append(t)
        return (None, None, None, None)

    run(zero_state(g8), params, g8, StepConfig(dt=0.1, t_end=0.3), sources=sources)
    np.testing.assert_allclose(calls, [0.1, 0.2, 0.3])
