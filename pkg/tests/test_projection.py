import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moistpe.grid import BC, field_bcs, make_grid, overbar, PhysParams
from moistpe.helmholtz import helmholtz_direct
from moistpe.projection import EllipticSolve, NonConvergence, project, solve_surface_direct, surface_laplacian
from moistpe.stencils import divergence, diffusion
from moistpe.timestepper import helmholtz_solve


def _rel_div(v1, v2, g):
    d = divergence(overbar(v1, g), overbar(v2, g), g)
    return np.sqrt(np.sum(g.w2 * d * d))


def test_already_constrained_is_untouched(g8, params):
    from moistpe.forcing import random_state
    s = random_state(g8, params, 0)
    v1, v2, phi = project(s.v1, s.v2, 0.1, g8)
    assert np.abs(phi).max() < 1e-10
    np.testing.assert_allclose(v1, s.v1, atol=1e-11)
    np.testing.assert_allclose(v2, s.v2, atol=1e-11)


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_gradient_field_is_removed(method):
    errs = []
    for n in (16, 32):
        g = make_grid(n, n, 4, 2.0, 1.0)
        X, Y = g.mesh2d()
        chi = np.cos(np.pi * X / g.lx) * np.cos(np.pi * Y / g.ly)
        v1 = np.broadcast_to((-np.pi / g.lx * np.sin(np.pi * X / g.lx) * np.cos(np.pi * Y / g.ly))[..., None],
                             g.shape).copy()
        v2 = np.broadcast_to((-np.pi / g.ly * np.cos(np.pi * X / g.lx) * np.sin(np.pi * Y / g.ly))[..., None],
                             g.shape).copy()
        out1, out2, phi = project(v1, v2, 1.0, g, EllipticSolve(tolerance=1e-10, method=method))
        errs.append(np.abs(phi - chi).max())
        assert np.abs(out1).max() < 0.1 and np.abs(out2).max() < 0.1
    assert errs[0] < 0.05
    assert errs[0] / errs[1] > 3.5


@given(seed=st.integers(0, 10_000), dt=st.floats(1e-3, 1.0))
def test_projection_constrains_and_gauges(seed, dt):
    g = make_grid(6, 9, 4, 1.0, 1.5)
    rng = np.random.default_rng(seed)
    v1, v2 = rng.standard_normal((2, *g.shape))
    v1[[0, -1]] = 0.0
    v2[:, [0, -1]] = 0.0
    before = _rel_div(v1, v2, g)
    o1, o2, phi = project(v1, v2, dt, g)
    assert _rel_div(o1, o2, g) <= 1e-8 * before
    assert abs(np.sum(g.w2 * phi)) / g.volume <= 1e-14 * np.abs(phi).max() + 1e-300
    # correction is the same on every level
    np.testing.assert_allclose(np.broadcast_to((v1 - o1)[..., :1], g.shape), v1 - o1, atol=1e-12)


def test_direct_and_cg_agree(g8, rng):
    v1, v2 = rng.standard_normal((2, *g8.shape))
    v1[[0, -1]] = 0.0
    v2[:, [0, -1]] = 0.0
    a = project(v1, v2, 0.5, g8, EllipticSolve(tolerance=1e-12, method="direct"))
    b = project(v1, v2, 0.5, g8, EllipticSolve(tolerance=1e-12, method="cg"))
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-9)


def test_direct_solver_inverts_laplacian(g8, rng):
    phi = rng.standard_normal(g8.shape2d)
    phi -= np.sum(g8.w2 * phi)
    rhs = -surface_laplacian(phi, g8)
    x = solve_surface_direct(rhs, g8)
    np.testing.assert_allclose(-surface_laplacian(x, g8), rhs, atol=1e-10)


def test_unreachable_tolerance_raises(g8, rng):
    v1, v2 = rng.standard_normal((2, *g8.shape))
    v1[[0, -1]] = 0.0
    v2[:, [0, -1]] = 0.0
    with pytest.raises(NonConvergence):
        project(v1, v2, 1.0, g8, EllipticSolve(tolerance=1e-30, method="direct"))
    with pytest.raises(NonConvergence):
        project(v1, v2, 1.0, g8, EllipticSolve(tolerance=1e-14, max_iter=2, method="cg"))


# ------------------------------------------------------- implicit solves

@pytest.mark.parametrize("name", ["v1", "v2", "T", "q"])
def test_helmholtz_direct_matches_cg_and_residual(name, rng):
    p = PhysParams(Rt2=0.7, alpha=2.0)
    g = make_grid(6, 7, 5, 1.2, 0.9)
    bc = field_bcs(p)[name]
    rhs = rng.standard_normal(g.shape)
    if bc.x == -1:
        rhs[[0, -1]] = 0.0
    if bc.y == -1:
        rhs[:, [0, -1]] = 0.0
    kh, kz, c = 0.8, 1.0 / 0.7, 0.05
    u = helmholtz_direct(rhs, bc, kh, kz, c, g)
    np.testing.assert_allclose(u + c * diffusion(u, bc, kh, kz, g), rhs, atol=1e-11)
    ucg, _ = helmholtz_solve(rhs, bc, kh, kz, c, g, 1e-13)
    np.testing.assert_allclose(u, ucg, atol=1e-10)


def test_helmholtz_zero_coefficient_is_identity(g8, rng):
    rhs = rng.standard_normal(g8.shape)
    np.testing.assert_array_equal(helmholtz_direct(rhs, BC(1, 1), 1.0, 1.0, 0.0, g8), rhs)
