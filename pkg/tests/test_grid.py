import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moistpe.forcing import random_state
from moistpe.grid import (
    GridError,
    ParameterError,
    PhysParams,
    State,
    apply_boundary_conditions,
    field_bcs,
    ghost_bc_residuals,
    make_grid,
    onesided_bc_residuals,
    overbar,
    vertical_integral,
    with_ghosts,
    zero_state,
)


def test_uniform_grid_levels():
    g = make_grid(4, 4, 4, 1, 1)
    assert g.hz == 0.25
    assert len(g.z) == 5
    assert g.z[0] == 0.0 and g.z[-1] == 1.0


def test_anisotropic_spacing():
    g = make_grid(8, 8, 8, 2, 1)
    assert (g.hx, g.hy) == (0.25, 0.125)


@pytest.mark.parametrize("dims", [(3, 4, 4), (4, 2, 4), (4, 4, 0), (4.5, 4, 4)])
def test_rejects_small_or_fractional_counts(dims):
    with pytest.raises(GridError):
        make_grid(*dims)


@pytest.mark.parametrize("lx", [0.0, -1.0, math.inf, math.nan])
def test_rejects_bad_extent(lx):
    with pytest.raises(GridError):
        make_grid(4, 4, 4, lx, 1.0)


def test_trapezoid_weights_sum_to_volume():
    g = make_grid(6, 10, 5, 2.0, 0.5)
    assert g.w3.sum() == pytest.approx(1.0)
    assert g.w2.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["Re1", "Rt4", "alpha", "beta", "p0"])
def test_params_positive(name):
    with pytest.raises(ParameterError, match=name):
        PhysParams(**{name: -1.0})


def test_params_pressure_ordering():
    with pytest.raises(ParameterError):
        PhysParams(P=0.2, p0=0.5)
    p = PhysParams()
    z = np.linspace(0, 1, 11)
    assert np.all(p.pressure(z) >= p.p0) and np.all(p.pressure(z) <= p.P)


def test_negative_coriolis_allowed():
    assert PhysParams(f=-2.0).f == -2.0


def test_state_vector_roundtrip(g8, params):
    s = random_state(g8, params, 7)
    back = State.from_vector(s.to_vector(), g8, s.time)
    for a, b in zip(s.fields(), back.fields()):
        assert np.array_equal(a, b)


def test_zero_state_satisfies_everything(g8, params):
    s = zero_state(g8)
    out = apply_boundary_conditions(s, params, g8)
    for a, b in zip(s.fields(), out.fields()):
        assert np.array_equal(a, b)


def test_apply_bcs_idempotent(g8, params, rng):
    s = State(*(rng.standard_normal(g8.shape) for _ in range(4)))
    once = apply_boundary_conditions(s, params, g8)
    twice = apply_boundary_conditions(once, params, g8)
    for a, b in zip(once.fields(), twice.fields()):
        assert np.array_equal(a, b)
    assert np.all(once.v1[0] == 0) and np.all(once.v1[-1] == 0)
    assert np.all(once.v2[:, 0] == 0) and np.all(once.v2[:, -1] == 0)


def test_admissible_velocity_unchanged(params):
    g = make_grid(8, 8, 8, 2.0, 1.0)
    X, Y, Z = g.mesh()
    v1 = np.sin(np.pi * X / g.lx) * np.cos(np.pi * Z)
    s = State(v1, np.zeros(g.shape), np.zeros(g.shape), np.zeros(g.shape))
    out = apply_boundary_conditions(s, params, g)
    np.testing.assert_allclose(out.v1, v1, atol=1e-15)
    res = ghost_bc_residuals(with_ghosts(out.v1, field_bcs(params)["v1"], g.hz), field_bcs(params)["v1"], g)
    assert max(res.values()) < 1e-12


def test_robin_closure_of_exponential(g8, params):
    X, Y, Z = g8.mesh()
    q = np.exp(Z)
    s = State(np.zeros(g8.shape), np.zeros(g8.shape), np.zeros(g8.shape), q)
    # the raw field violates the Robin condition at the top
    assert onesided_bc_residuals(s, params, g8)["q"] > 1.0
    bc = field_bcs(params)["q"]
    padded = with_ghosts(apply_boundary_conditions(s, params, g8).q, bc, g8.hz)
    res = ghost_bc_residuals(padded, bc, g8, params.Rt4)
    assert res["top"] < 1e-12
    np.testing.assert_array_equal(padded[1:-1, 1:-1, 1:-1], q)


def test_vertical_integral_constant_and_linear(g8):
    X, Y, Z = g8.mesh()
    np.testing.assert_allclose(overbar(np.ones(g8.shape), g8), 1.0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(overbar(Z, g8), 0.5, atol=1e-15)


def test_vertical_integral_quadratic_error_bound(g8):
    Z = g8.mesh()[2]
    err = np.abs(overbar(Z ** 2, g8) - 1.0 / 3.0).max()
    assert err <= 1.0 / (6 * 64) + 1e-15


def test_vertical_integral_levels(g8):
    Z = g8.mesh()[2]
    cum = vertical_integral(np.ones(g8.shape), g8)
    np.testing.assert_allclose(cum, Z, atol=1e-15)
    np.testing.assert_allclose(vertical_integral(np.ones(g8.shape), g8, level=4), 0.5)


def test_trapezoid_second_order():
    errs = []
    for nz in (8, 16, 32):
        g = make_grid(4, 4, nz)
        errs.append(abs(overbar(np.exp(g.mesh()[2]), g)[0, 0] - (math.e - 1)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 10_000))
def test_vertical_integral_linear(a, b, seed):
    g = make_grid(4, 5, 6)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    lhs = vertical_integral(a * f + b * h, g)
    rhs = a * vertical_integral(f, g) + b * vertical_integral(h, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))
