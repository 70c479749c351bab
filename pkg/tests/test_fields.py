"""Grid domains, scalar fields, translations and horizontal gradients."""

import numpy as np
import pytest

from carnot.groups import euclidean, heisenberg, engel
from carnot.fields import (GridDomain, DomainError, ScalarField, constant_field,
                           probe_field, from_expression, quadratic_field,
                           grid_field, translate_field, translate_domain,
                           horizontal_gradient, sobolev_seminorm)


class TestGridDomain:
    def test_box_volume(self):
        dom = GridDomain.box(np.zeros(2), np.array([1.0, 2.0]), 4)
        assert dom.volume == pytest.approx(2.0)
        assert dom.cell_volume == pytest.approx(0.125)

    def test_contains_and_centers(self):
        dom = GridDomain.box(-np.ones(2), np.ones(2), 4)
        assert dom.contains([[0.1, 0.1], [3.0, 0.0]]).tolist() == [True, False]
        assert len(dom.centers()) == 16

    def test_mask_algebra(self):
        dom = GridDomain.box(-np.ones(2), np.ones(2), 4)
        left = GridDomain(dom.lo, dom.hi, dom.shape,
                          np.arange(16).reshape(4, 4) < 8)
        right = left.difference(left)  # empty
        assert right.is_empty
        assert left.union(dom).volume == dom.volume
        assert left.intersect(dom).volume == left.volume
        assert left.is_subset(dom) and not dom.is_subset(left)
        assert left.is_disjoint(dom.difference(left))

    def test_erode_and_refine(self):
        dom = GridDomain.box(-np.ones(2), np.ones(2), 6)
        assert dom.erode_cells(1).mask.sum() == 16
        fine = dom.refine(3)
        assert fine.shape == (18, 18)
        assert fine.volume == pytest.approx(dom.volume)

    def test_ball_matches_norm(self):
        g = heisenberg(1)
        norm = g.norm()
        ball = GridDomain.ball(norm, g.origin(), 0.8, 10)
        centers = ball.centers()
        assert (norm(centers) < 0.8).all()
        assert ball.volume > 0

    def test_lattice_mismatch_raises(self):
        a = GridDomain.box(-np.ones(2), np.ones(2), 4)
        b = GridDomain.box(-np.ones(2), np.ones(2), 5)
        with pytest.raises(DomainError):
            a.union(b)


class TestFields:
    def test_probe_gradient_is_exact(self):
        g = engel()
        xi = np.array([0.3, -1.1])
        u = probe_field(g, xi)
        pts = np.random.default_rng(0).normal(size=(40, 4))
        assert np.abs(u.hgrad(pts) - xi).max() == 0.0

    def test_expression_matches_quadratic(self):
        g = heisenberg(1)
        ue = from_expression(g, "1.5 + 2*x1 - x2 + x1*x3")
        quad = np.zeros((3, 3))
        quad[0, 2] = 1.0
        uq = quadratic_field(g, 1.5, [2.0, -1.0, 0.0], quad)
        pts = np.random.default_rng(1).normal(size=(30, 3))
        np.testing.assert_allclose(ue.values(pts), uq.values(pts), atol=1e-12)
        np.testing.assert_allclose(ue.hgrad(pts), uq.hgrad(pts), atol=1e-12)

    def test_heisenberg_vertical_derivative(self):
        # u = x3: X1 u = -x2/2, X2 u = x1/2
        g = heisenberg(1)
        u = from_expression(g, "x3")
        pts = np.array([[1.0, 2.0, 0.3], [-0.5, 0.4, 1.1]])
        expect = np.stack([-pts[:, 1] / 2, pts[:, 0] / 2], axis=-1)
        np.testing.assert_allclose(u.hgrad(pts), expect, atol=1e-14)

    def test_domain_guard(self):
        dom = GridDomain.box(-np.ones(2), np.ones(2), 4)
        u = ScalarField(values=lambda p: np.atleast_2d(p)[:, 0], domain=dom)
        with pytest.raises(DomainError):
            u([[5.0, 0.0]])

    def test_algebra(self):
        g = euclidean(2)
        u = quadratic_field(g, 0.0, [1.0, 0.0])
        v = quadratic_field(g, 0.0, [0.0, 2.0])
        pts = np.array([[1.0, 1.0]])
        assert (u + v)(pts)[0] == pytest.approx(3.0)
        assert u.scaled(4.0)(pts)[0] == pytest.approx(4.0)
        assert u.shifted(1.0)(pts)[0] == pytest.approx(2.0)

    def test_grid_field_interpolates(self):
        g = euclidean(2)
        dom = GridDomain.box(-np.ones(2), np.ones(2), 8)
        target = quadratic_field(g, 0.0, [1.0, -2.0])
        u = grid_field(g, dom, target.values(dom.all_centers()))
        inner = dom.erode_cells(1).centers()
        np.testing.assert_allclose(u.values(inner), target.values(inner), atol=1e-12)
        with pytest.raises(ValueError):
            u.values([[2.0, 2.0]])


class TestTranslation:
    def test_field_pullback(self):
        g = heisenberg(1)
        rng = np.random.default_rng(2)
        y = rng.normal(size=3)
        u = quadratic_field(g, 0.3, rng.normal(size=3), rng.normal(size=(3, 3)))
        tu = translate_field(g, y, u)
        pts = rng.normal(size=(25, 3))
        np.testing.assert_allclose(tu.values(pts),
                                   u.values(g.multiply(g.inverse(y), pts)), atol=1e-12)

    def test_frame_left_invariance(self):
        # X_j(tau_y u) and tau_y(X_j u) computed through different formulas
        g = engel()
        rng = np.random.default_rng(3)
        y = rng.normal(size=4)
        u = quadratic_field(g, 0.0, rng.normal(size=4), rng.normal(size=(4, 4)))
        tu = translate_field(g, y, u)
        pts = rng.normal(size=(25, 4))
        np.testing.assert_allclose(tu.hgrad(pts),
                                   u.hgrad(g.multiply(g.inverse(y), pts)), atol=1e-10)

    def test_domain_volume_preserved(self):
        # Haar measure: translation keeps the volume up to mask resolution
        g = heisenberg(1)
        dom = GridDomain.box(-np.ones(3), np.ones(3), 10)
        moved = translate_domain(g, np.array([0.3, -0.2, 0.5]), dom)
        boundary = 2 * 6 * 10 * 10 * dom.cell_volume
        assert abs(moved.volume - dom.volume) <= boundary

    def test_grid_aligned_euclidean_exact(self):
        g = euclidean(2)
        dom = GridDomain.box(-np.ones(2), np.ones(2), 8)
        y = 3 * dom.spacing
        moved = translate_domain(g, y, dom)
        assert moved.volume == pytest.approx(dom.volume)
        np.testing.assert_allclose(np.sort(moved.centers(), axis=0),
                                   np.sort(dom.centers() + y, axis=0), atol=1e-12)


class TestHorizontalGradient:
    def test_group_fd_exact_on_step2_quadratics(self):
        # t -> x.(t e_j) is affine on step-2 groups, so central differences
        # of quadratics are exact up to roundoff
        g = heisenberg(1)
        rng = np.random.default_rng(4)
        u = quadratic_field(g, 0.0, rng.normal(size=3), rng.normal(size=(3, 3)))
        pts = rng.normal(size=(30, 3))
        fd = horizontal_gradient(g, u, pts, mode="group-fd", h=1e-3)
        np.testing.assert_allclose(fd, u.hgrad(pts), atol=1e-9)

    def test_fd_second_order(self):
        g = heisenberg(1)
        u = from_expression(g, "x1**3 + x2**2*x1")
        pts = np.random.default_rng(5).normal(size=(10, 3))
        exact = u.hgrad(pts)
        e1 = np.abs(horizontal_gradient(g, u, pts, mode="group-fd", h=2e-2) - exact).max()
        e2 = np.abs(horizontal_gradient(g, u, pts, mode="group-fd", h=1e-2) - exact).max()
        assert 3.2 <= e1 / e2 <= 4.8

    def test_unknown_mode(self):
        g = euclidean(2)
        with pytest.raises(ValueError):
            horizontal_gradient(g, probe_field(g, [1.0, 0.0]), [[0.0, 0.0]], mode="spectral")

    def test_seminorm_probe_closed_form(self):
        g = heisenberg(1)
        xi = np.array([3.0, 4.0])
        dom = GridDomain.box(-np.ones(3), np.ones(3), 6)
        for p in (1.0, 2.0, 3.0):
            expect = 5.0 * dom.volume ** (1.0 / p)
            assert sobolev_seminorm(g, probe_field(g, xi), dom, p) == pytest.approx(expect)
