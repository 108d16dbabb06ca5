import numpy as np
import pytest

from moistpe.energy import barotropic_violation
from moistpe.grid import PhysParams, make_grid, onesided_bc_residuals
from moistpe.mms import ManufacturedSpec, manufactured, observed_orders, spatial_ladder, temporal_ladder


@pytest.fixture(scope="module")
def mfd():
    return manufactured(ManufacturedSpec(omega_amp=0.5), PhysParams(Rt2=0.7, alpha=1.3, beta=0.8))


def test_observed_orders():
    assert observed_orders([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])
    assert observed_orders([1.0, 0.5], ratio=2.0) == pytest.approx([1.0])


def test_exact_solution_satisfies_constraint(mfd):
    g = make_grid(24, 24, 8)
    s = mfd.state(g, 0.3)
    # the barotropic part of the catalog field is exactly divergence free;
    # the sampled field carries only the O(h^2) quadrature error
    assert barotropic_violation(s, g) < 0.02


@pytest.mark.parametrize("t", [0.0, 0.7])
def test_exact_solution_satisfies_boundary_conditions(mfd, t):
    res = []
    for n in (16, 32):
        g = make_grid(n, n, n)
        s = mfd.state(g, t)
        assert np.all(np.abs(s.v1[[0, -1]]) < 1e-14) and np.all(np.abs(s.v2[:, [0, -1]]) < 1e-14)
        res.append(onesided_bc_residuals(s, mfd.params, g))
    # one-sided derivative residuals vanish under refinement
    for k in res[0]:
        assert res[1][k] < res[0][k] / 3


def test_sources_are_finite(mfd):
    g = make_grid(6, 6, 6)
    for f in mfd.source_fields(g, 0.4):
        assert f.shape == g.shape and np.all(np.isfinite(f))


def test_spatial_convergence_quick():
    tab = spatial_ladder(sizes=(8, 16))
    assert tab.orders[0] >= 1.8
    assert tab.errors[1] < tab.errors[0]


@pytest.mark.slow
def test_temporal_self_convergence_quick():
    tab = temporal_ladder(n=8, dts=(0.02, 0.01, 0.005), t_end=0.4)
    assert tab.min_order >= 0.9
