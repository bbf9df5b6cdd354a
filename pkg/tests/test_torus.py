import numpy as np
import pytest

from beamctrl.torus import SpatialGrid, TimeGrid, gauss_panels, uniform_interior


def test_nodes_and_wavenumbers():
    g = SpatialGrid(16, 3.0, x0=-1.0)
    assert g.h == pytest.approx(3.0 / 16)
    assert g.nodes[0] == -1.0
    assert g.kappa[1] == pytest.approx(2 * np.pi / 3.0)


def test_transforms_roundtrip():
    g = SpatialGrid(32, 2.0)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(32)
    assert np.allclose(g.to_nodes(g.to_modes(u)), u, atol=1e-13)


def test_spectral_derivative_exact_for_modes():
    g = SpatialGrid(32, 3.0, x0=-1.0)
    kap = g.kappa[3]
    u = np.sin(kap * g.nodes)
    for order, expect in [(1, kap * np.cos(kap * g.nodes)),
                          (2, -kap**2 * np.sin(kap * g.nodes)),
                          (4, kap**4 * np.sin(kap * g.nodes))]:
        assert np.allclose(g.deriv(u, order), expect, atol=1e-10)


def test_parseval_consistency():
    g = SpatialGrid(64, 3.0)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(64)
    assert g.l2_sq(u) == pytest.approx(g.sobolev_sq(u, 0), rel=1e-12)


def test_sobolev_single_mode():
    g = SpatialGrid(64, 3.0, x0=-1.0)
    kap = g.kappa[2]
    u = np.cos(kap * g.nodes)
    # |u|_{L2}^2 = M/2; each derivative adds a kappa^2 factor
    expect = (1 + kap**2) ** 3 * g.circumference / 2
    assert g.sobolev_sq(u, 3) == pytest.approx(expect, rel=1e-12)


def test_grid_rejects_odd_size():
    with pytest.raises(ValueError):
        SpatialGrid(15, 1.0)


def test_uniform_interior_weights_sum_to_horizon():
    tg = uniform_interior(2.0, 10)
    assert tg.weights.sum() == pytest.approx(2.0)
    assert np.all(tg.nodes > 0) and np.all(tg.nodes < 2.0)


def test_gauss_panels_integrate_polynomial_exactly():
    tg = gauss_panels(4.0, np.array([0.5, 1.0, 3.0, 3.5]), 64)
    vals = tg.nodes**5 - 2.0 * tg.nodes**2
    exact = 4.0**6 / 6 - 2.0 * 4.0**3 / 3
    assert np.sum(tg.weights * vals) == pytest.approx(exact, rel=1e-13)


def test_time_grid_rejects_boundary_nodes():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 2.0)
