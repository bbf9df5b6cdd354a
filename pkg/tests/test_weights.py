import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamctrl.hum import fd_weights
from beamctrl.torus import SpatialGrid, gauss_panels, uniform_interior
from beamctrl.weights import (CarlemanParams, ConstructionError, DomainSpec,
                              audit_derivative_bounds, build_eta, build_theta,
                              eval_weights, sweep_lambda_bounds,
                              weights_from_values)


class TestTheta:
    def test_piece_values(self, theta):
        # 1/t^2 and 1/(T-t)^2 pieces plus the plateau, T=4, T0=T1=0.5
        for t, expect in [(0.25, 16.0), (0.5, 4.0), (2.0, 1.0), (3.75, 16.0)]:
            assert theta.eval(np.array([t]))[0] == pytest.approx(expect, rel=1e-12)

    def test_at_least_one_everywhere(self, theta, domain):
        ts = np.linspace(1e-4, domain.T - 1e-4, 4001)
        assert np.all(theta.eval(ts) >= 1.0 - 1e-12)

    def test_blend_monotonicity(self, theta):
        ts = np.linspace(theta.T0, 2 * theta.T0, 513)[1:-1]
        assert np.all(theta.eval(ts, 1) < 0)
        ts = np.linspace(theta.T - 2 * theta.T1, theta.T - theta.T1, 513)[1:-1]
        assert np.all(theta.eval(ts, 1) > 0)

    def test_c4_junctions(self, theta):
        # one-sided 6-point estimates from both sides of every junction must
        # agree within the stencil's own O(h) error: halving h shrinks the
        # cross-junction defect for every order up to 4
        def defect(tj, order, h):
            left_nodes = tj - h * np.arange(6)[::-1]
            right_nodes = tj + h * np.arange(6)
            wl = fd_weights(tj, left_nodes, order)[:, order]
            wr = fd_weights(tj, right_nodes, order)[:, order]
            return abs(wl @ theta.eval(left_nodes, 0)
                       - wr @ theta.eval(right_nodes, 0))

        for tj in theta.junctions:
            scale = max(abs(theta.eval(np.array([tj + 1e-9]), o)[0])
                        for o in range(5))
            for order in range(5):
                d1 = defect(tj, order, 1e-3)
                d2 = defect(tj, order, 5e-4)
                assert d2 <= max(0.75 * d1, 1e-8 * scale), (tj, order)

    def test_rejects_T0_at_least_one(self, domain):
        with pytest.raises(ValueError):
            CarlemanParams(s=1.0, lam=1.0, T0=1.5, T1=0.5)

    def test_rejects_junctions_exceeding_horizon(self):
        params = CarlemanParams(s=1.0, lam=1.0, T0=0.6, T1=0.6)
        with pytest.raises(ValueError):
            build_theta(params, 2.0)

    @given(T0=st.floats(0.05, 0.9), T1=st.floats(0.05, 0.9))
    @settings(max_examples=25, deadline=None)
    def test_always_above_plateau(self, T0, T1):
        # parameters are either accepted with a certified profile or
        # rejected by the monotonicity/plateau certification scan
        T = 2.0 * (T0 + T1) + 1.0
        try:
            theta = build_theta(CarlemanParams(s=1.0, lam=1.0, T0=T0, T1=T1), T)
        except ConstructionError:
            return
        ts = np.linspace(T * 1e-3, T * (1 - 1e-3), 801)
        assert np.all(theta.eval(ts) >= 1.0 - 1e-12)


class TestEta:
    def test_positive_everywhere(self, eta, domain):
        xs = np.linspace(-domain.L, domain.d + domain.L, 4097)[:-1]
        assert eta.derivs(xs, 0)[:, 0].min() > 0

    def test_slope_floor_on_interior(self, eta, domain):
        # scan over the beam interior [0, d] at resolution 2048
        xs = np.linspace(0.0, domain.d, 2048)
        slopes = eta.derivs(xs, 1)[:, 1]
        assert np.abs(slopes).min() > 0
        assert eta.slope_floor > 0

    def test_extrema_inside_omega(self, eta, domain):
        xs = np.linspace(-domain.L, domain.d + domain.L, 8192, endpoint=False)
        d1 = eta.derivs(xs, 1)[:, 1]
        crossings = xs[np.flatnonzero(d1[:-1] * d1[1:] <= 0)]
        assert crossings.size >= 2
        assert np.all(domain.in_omega(crossings))

    def test_periodic_continuity_across_seam(self, eta, domain):
        M = domain.circumference
        left = eta.derivs(np.array([-domain.L + 1e-9]), 6)
        right = eta.derivs(np.array([domain.d + domain.L - 1e-9 - M]), 6)
        # same point expressed through the wrap; derivatives must agree
        assert np.allclose(left, right, rtol=1e-9, atol=1e-9)

    def test_derivative_continuity_scan(self, eta, domain):
        xs = np.linspace(-domain.L, domain.d + domain.L, 8192, endpoint=False)
        d = eta.derivs(xs, 6)
        h = xs[1] - xs[0]
        for j in range(6):
            jumps = np.abs(np.diff(d[:, j]))
            bound = 2.0 * h * np.max(np.abs(d[:, j + 1])) + 1e-12
            assert jumps.max() < bound

    def test_rejects_wide_mollifier(self, domain):
        with pytest.raises(ValueError):
            build_eta(domain, 0.1, mollify_radius=domain.L)

    @given(scale=st.floats(0.02, 0.5), radius=st.floats(0.02, 0.24))
    @settings(max_examples=15, deadline=None)
    def test_construction_certificates(self, domain, scale, radius):
        profile = build_eta(domain, eta_scale=scale, mollify_radius=radius)
        assert profile.slope_floor > 0
        assert profile.eta_max == pytest.approx(1.05 * scale, rel=1e-6)


class TestWeightFormulas:
    def test_spot_values(self):
        # eta = 0.05, |eta| = 0.1, lam = 2, theta = 1
        phi, xi = weights_from_values(0.05, 0.1, 1.0, 2.0)
        assert xi == pytest.approx(np.exp(0.9), rel=1e-14)
        assert phi == pytest.approx(np.exp(1.2) - np.exp(0.9), rel=1e-13)

    def test_sum_identity(self, weights64, theta, params, eta):
        # phi + xi = theta * exp(6 lam |eta|) pointwise
        expect = theta.eval(weights64.t_nodes)[:, None] \
            * np.exp(6.0 * params.lam * eta.eta_max)
        total = weights64.phi + weights64.xi
        assert np.max(np.abs(total - expect) / expect) < 1e-12

    def test_positivity(self, weights64):
        assert weights64.phi.min() > 0
        assert weights64.xi.min() > 0

    def test_analytic_vs_spectral_derivatives(self, eta, theta, params, domain):
        # cross-validation of the chain-rule formulas; the tolerance loosens
        # with the order because the spectral derivative amplifies roundoff
        # by kappa^order
        g = SpatialGrid(2048, domain.circumference, x0=-domain.L)
        tg = uniform_interior(domain.T, 8)
        w = eval_weights(eta, theta, params, g.nodes, tg)
        for order, tol in [(1, 1e-8), (2, 1e-6), (3, 1e-4), (4, 2e-3)]:
            spectral = g.deriv(w.xi, order)
            rel = np.max(np.abs(spectral - w.xi_x[order])) \
                / np.max(np.abs(w.xi_x[order]))
            assert rel < tol, order

    def test_time_nodes_strictly_interior(self, weights64, domain):
        assert weights64.t_nodes.min() > 0
        assert weights64.t_nodes.max() < domain.T


class TestBoundAudit:
    def test_phi_xi_spatial_derivatives_opposite(self, weights64):
        report = audit_derivative_bounds(weights64)
        assert report.identity_defect == 0.0

    def test_every_ledger_entry_present(self, weights64):
        report = audit_derivative_bounds(weights64)
        names = {r.inequality for r in report.records}
        for fam in ("phi", "xi"):
            for i in (1, 2, 3, 4):
                assert f"{fam}_x{i}" in names
            for suffix in ("t", "tt", "tx", "txx", "txxx", "ttx", "ttxx"):
                assert f"{fam}_{suffix}" in names
        assert len(report.records) == 22
        assert len(report.positivity) == 4

    def test_positivity_floors(self, weights64):
        report = audit_derivative_bounds(weights64)
        assert all(p.floor > 0 for p in report.positivity)

    def test_lambda_sweep_growth(self, eta, theta, grid64, tgrid128):
        sweep = sweep_lambda_bounds(eta, theta, 4.0, [1.0, 2.0, 4.0],
                                    0.5, 0.5, grid64.nodes, tgrid128)
        assert sweep.stable(2.0)
        assert sweep.positivity_threshold == 1.0

    def test_constants_stabilize_under_refinement(self, eta, theta, params,
                                                  domain):
        # grid maxima approach the true sup from below and settle to a
        # finite limit once the mollified corner features are resolved
        tg = gauss_panels(domain.T, np.array(theta.junctions), 128)
        maxima = []
        for n in (256, 512, 1024):
            g = SpatialGrid(n, domain.circumference, x0=-domain.L)
            w = eval_weights(eta, theta, params, g.nodes, tg)
            maxima.append(audit_derivative_bounds(w).by_name())
        for name in maxima[0]:
            seq = [m[name] for m in maxima]
            assert all(np.isfinite(c) for c in seq)
            assert seq[1] >= seq[0] * (1 - 1e-12)
            assert seq[2] >= seq[1] * (1 - 1e-12)
            assert seq[2] <= 1.02 * seq[1]
