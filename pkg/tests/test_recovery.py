"""Integrand recovery, uniqueness checks, the constrained minimizer and the
variational-limit experiment."""

import numpy as np
import pytest

from carnot.groups import euclidean, heisenberg
from carnot.fields import GridDomain, probe_field, quadratic_field
from carnot.functionals import (PowerIntegrand, QuadraticIntegrand,
                                MaxAffineIntegrand, OffsetIntegrand,
                                ShiftedArgIntegrand, IntegrandFunctional)
from carnot.recovery import (HypothesisError, uniform_xi_grid, recover_integrand,
                             constancy_probe, verify_uniqueness, MinimizeSettings,
                             minimize_convex, gamma_experiment,
                             _gradient_operators)

from conftest import x_weighted_functional


@pytest.fixture(scope="module")
def h1():
    g = heisenberg(1)
    return g, g.norm()


@pytest.fixture(scope="module")
def ball(h1):
    g, norm = h1
    return GridDomain.ball(norm, g.origin(), 1.0, 12)


class TestRecovery:
    def test_grid_shape(self):
        grid = uniform_xi_grid(2, radius=4.0, points=9)
        assert grid.shape == (81, 2)
        assert grid.min() == -4.0 and grid.max() == 4.0

    def test_round_trip_menu(self, h1, ball):
        g, _ = h1
        rng = np.random.default_rng(0)
        b = rng.normal(size=(2, 2))
        xi_grid = uniform_xi_grid(2, radius=4.0, points=9)
        menu = [PowerIntegrand(2, 1.0), PowerIntegrand(2, 2.0), PowerIntegrand(2, 3.0),
                QuadraticIntegrand(b.T @ b + 0.1 * np.eye(2)),
                MaxAffineIntegrand(rng.normal(size=(5, 2)), rng.normal(size=5))]
        for f in menu:
            rec = recover_integrand(IntegrandFunctional(g, f), g, ball, xi_grid)
            truth = f(xi_grid)
            rel = np.abs(rec.values - truth) / np.maximum(1.0, np.abs(truth))
            assert rel.max() <= 1e-10
            assert rec.convexity_violation() <= 1e-10
            assert rec.growth_slack(f.growth).min() >= -1e-10

    def test_zero_probe_reads_f_at_zero(self, h1, ball):
        g, _ = h1
        f = OffsetIntegrand(PowerIntegrand(2, 2.0), 0.75)
        rec = recover_integrand(IntegrandFunctional(g, f), g, ball, np.zeros((1, 2)))
        assert rec.values[0] == pytest.approx(0.75, rel=1e-12)

    def test_empty_base_rejected(self, h1):
        g, _ = h1
        box = GridDomain.box(-np.ones(3), np.ones(3), 4)
        empty = GridDomain(box.lo, box.hi, box.shape, np.zeros(box.shape, bool))
        with pytest.raises(ValueError):
            recover_integrand(IntegrandFunctional(g, PowerIntegrand(2, 2.0)),
                              g, empty, np.zeros((1, 2)))

    def test_interp(self, h1, ball):
        g, _ = h1
        f = PowerIntegrand(2, 2.0)
        rec = recover_integrand(IntegrandFunctional(g, f), g, ball,
                                uniform_xi_grid(2, 4.0, 17))
        # grid nodes are exact; midpoints interpolate the convex envelope from above
        assert rec.interp([[1.0, 1.0]])[0] == pytest.approx(2.0, rel=1e-10)


class TestConstancy:
    CENTERS = np.array([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0], [0.0, -1.5, 0.5]])

    def test_left_invariant_spread_is_tiny(self, h1):
        g, norm = h1
        F = IntegrandFunctional(g, PowerIntegrand(2, 2.0))
        rep = constancy_probe(F, g, norm, [1.0, 0.0], self.CENTERS, [0.9, 0.7, 0.5])
        assert rep["max_spread"] <= 1e-12

    def test_x_dependent_fixture_fires(self, h1):
        g, norm = h1
        F = x_weighted_functional(g)
        rep = constancy_probe(F, g, norm, [1.0, 0.0], self.CENTERS, [0.9, 0.7, 0.5])
        assert rep["max_spread"] >= 0.5


class TestUniqueness:
    def test_same_integrand_two_resolutions(self, h1, ball):
        g, _ = h1
        f = PowerIntegrand(2, 2.0)
        F1 = IntegrandFunctional(g, f, refine=1)
        F2 = IntegrandFunctional(g, f, refine=2)
        F4 = IntegrandFunctional(g, f, refine=4)
        rng = np.random.default_rng(1)
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        pairs = [(quadratic_field(g, 0.0, rng.normal(size=3), rng.normal(size=(3, 3))),
                  dom) for _ in range(50)]
        rep = verify_uniqueness(F1, F2, g, ball, uniform_xi_grid(2, 4.0, 5),
                                pairs, probe_tol=1e-10)
        assert rep["probes_agree"]
        # order-2 quadrature: |F1 - F2| is controlled by the next refinement gap
        for (u, a), gap in zip(pairs, rep["value_gaps"]):
            finer = abs(F2.eval(u, a) - F4.eval(u, a))
            assert gap <= 4.5 * finer + 1e-12

    def test_offset_is_distinct_with_volume_gap(self, h1, ball):
        g, _ = h1
        f = PowerIntegrand(2, 2.0)
        F = IntegrandFunctional(g, f)
        G = IntegrandFunctional(g, OffsetIntegrand(f, 1.0))
        xi_grid = uniform_xi_grid(2, 4.0, 5)
        rep = verify_uniqueness(F, G, g, ball, xi_grid, [], probe_tol=1e-10)
        assert not rep["probes_agree"]
        assert rep["probe_gap"] == pytest.approx(1.0, abs=1e-10)
        # in functional values the probe gap is exactly |A0|
        u = probe_field(g, xi_grid[0])
        assert abs(F.eval(u, ball) - G.eval(u, ball)) == pytest.approx(
            ball.volume, abs=1e-10)

    def test_blackbox_wrap_agrees(self, h1, ball):
        g, _ = h1
        from carnot.functionals import BlackBoxFunctional
        F = IntegrandFunctional(g, PowerIntegrand(2, 2.0))
        G = BlackBoxFunctional(F.eval)
        rep = verify_uniqueness(F, G, g, ball, uniform_xi_grid(2, 4.0, 5),
                                [(probe_field(g, [0.3, 0.3]), ball)], probe_tol=1e-12)
        assert rep["probes_agree"] and rep["max_value_gap"] == 0.0


def _trust_region_optimum(H, u0, delta, cellvol):
    """Independent oracle: exact constrained minimum of v^T H v over the
    L^2 ball around u0, via eigendecomposition and bisection on the
    multiplier."""
    radius = delta / np.sqrt(cellvol)
    w, V = np.linalg.eigh(H)
    g = V.T @ (H @ u0)

    def step_norm(lam):
        return np.linalg.norm(g / (w + lam))

    if step_norm(1e-14) <= radius:
        coef = g / (w + 1e-14)
    else:
        lo, hi = 1e-14, 1.0
        while step_norm(hi) > radius:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if step_norm(mid) > radius else (lo, mid)
        coef = g / (w + hi)
    v = u0 - V @ coef
    return float(v @ H @ v)


@pytest.fixture(scope="module")
def problem():
    g = euclidean(2)
    dom = GridDomain.box(-np.ones(2), np.ones(2), 8)
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    F = IntegrandFunctional(g, QuadraticIntegrand(M))
    u = quadratic_field(g, 0.0, [1.0, -0.5], 0.3 * np.eye(2))
    ops = _gradient_operators(g, dom)
    H = np.zeros((ops[0].shape[1],) * 2)
    for j in range(2):
        for k in range(2):
            H += M[j, k] * (ops[j].T @ ops[k]).toarray()
    H = dom.cell_volume * 0.5 * (H + H.T)
    return g, dom, F, u, H


class TestMinimizer:
    def test_delta_zero_returns_anchor(self, problem):
        g, dom, F, u, _ = problem
        res = minimize_convex(g, F, u, dom, 0.0)
        assert res.value == res.start_value
        np.testing.assert_array_equal(res.samples, u.values(dom.all_centers()))

    def test_never_exceeds_anchor(self, problem):
        g, dom, F, u, _ = problem
        for delta in (0.1, 0.5, 2.0):
            res = minimize_convex(g, F, u, dom, delta,
                                  settings=MinimizeSettings(max_iter=100))
            assert res.value <= res.start_value + 1e-12

    def test_matches_trust_region_oracle(self, problem):
        g, dom, F, u, H = problem
        u0 = u.values(dom.all_centers())
        for delta in (0.25, 0.5):
            exact = _trust_region_optimum(H, u0, delta, dom.cell_volume)
            res = minimize_convex(g, F, u, dom, delta,
                                  settings=MinimizeSettings(max_iter=600,
                                                            patience=600))
            assert res.value == pytest.approx(exact, rel=1e-6)

    def test_large_ball_approaches_zero_energy(self, problem):
        g, dom, F, u, _ = problem
        res = minimize_convex(g, F, u, dom, 50.0,
                              settings=MinimizeSettings(max_iter=800, patience=800))
        assert res.value <= 0.05 * res.start_value

    def test_negative_radius_rejected(self, problem):
        g, dom, F, u, _ = problem
        with pytest.raises(ValueError):
            minimize_convex(g, F, u, dom, -1.0)


class TestGamma:
    def test_p_one_rejected(self, h1, ball):
        g, _ = h1
        seq = [(1, PowerIntegrand(2, 2.0))]
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        with pytest.raises(HypothesisError):
            gamma_experiment(g, seq, [], dom, 1.0, 1.0, ball, np.zeros((1, 2)))

    def test_offset_sequence_limit(self, h1, ball):
        g, _ = h1
        base = PowerIntegrand(2, 2.0)
        seq = [(h, OffsetIntegrand(base, 1.0 / h)) for h in (1, 2, 4, 8, 16)]
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        xi_grid = uniform_xi_grid(2, 4.0, 5)
        u = probe_field(g, np.array([0.5, 0.5]))
        rep = gamma_experiment(g, seq, [u], dom, 0.5, 2.0, ball, xi_grid,
                               MinimizeSettings(max_iter=40))
        gap = np.abs(rep["limit"].values - base(xi_grid)).max()
        assert gap <= 1.0 / 16.0 + 1e-6
        for entry in rep["entries"]:
            for per in entry["fields"]:
                assert per["lower"] <= per["upper"] + 1e-12
        assert rep["limit_convexity_violation"] <= 1e-10

    def test_constant_sequence_collapses(self, h1, ball):
        g, _ = h1
        base = PowerIntegrand(2, 2.0)
        seq = [(h, base) for h in (1, 2, 4)]
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        u = probe_field(g, np.array([1.0, 0.0]))
        rep = gamma_experiment(g, seq, [u], dom, 0.0, 2.0, ball,
                               np.zeros((1, 2)), MinimizeSettings(max_iter=0))
        uppers = {per["upper"] for e in rep["entries"] for per in e["fields"]}
        lowers = {per["lower"] for e in rep["entries"] for per in e["fields"]}
        assert len(uppers) == 1 and uppers == lowers

    def test_alternating_sequence_has_two_limits(self, h1, ball):
        g, _ = h1
        shift = np.array([1.0, 0.0])
        seq = [(h, ShiftedArgIntegrand(PowerIntegrand(2, 2.0), (-1) ** h * shift))
               for h in (1, 2, 3, 4, 5, 6)]
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        xi_grid = uniform_xi_grid(2, 4.0, 5)
        rep = gamma_experiment(g, seq, [], dom, 0.0, 2.0, ball, xi_grid)
        recs = [e["recovered"].values for e in rep["entries"]]
        odd, even = recs[0::2], recs[1::2]
        for sub in (odd, even):
            for r in sub[1:]:
                np.testing.assert_allclose(r, sub[0], atol=1e-10)
        assert np.abs(odd[0] - even[0]).max() > 1.0
