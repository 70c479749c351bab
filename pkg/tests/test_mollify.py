"""Mollifier families, domain erosion and the group-local convolution."""

import numpy as np
import pytest

from carnot.groups import euclidean, heisenberg
from carnot.fields import (GridDomain, DomainError, constant_field, probe_field,
                           quadratic_field, from_expression)
from carnot.mollify import (MollifierFamily, erode_domain, convolve,
                            commutation_residual, convergence_table)


@pytest.fixture(scope="module")
def h1():
    g = heisenberg(1)
    return g, g.norm()


@pytest.fixture(scope="module")
def mollifier(h1):
    return MollifierFamily(h1[1], resolution=9)


@pytest.fixture(scope="module")
def omega():
    return GridDomain.box(-np.ones(3), np.ones(3), 12)


class TestFamily:
    def test_unit_mass_across_scales(self, mollifier):
        for eps in (1.0, 0.5, 0.25, 0.1):
            assert mollifier.unit_mass(eps) == pytest.approx(1.0, abs=1e-12)

    def test_nonnegative_and_supported(self, h1, mollifier):
        _, norm = h1
        pts = np.random.default_rng(0).uniform(-2, 2, size=(500, 3))
        vals = mollifier.profile(pts)
        assert (vals >= 0).all()
        assert np.abs(vals[norm(pts) >= 1.0]).max() == 0.0

    def test_symmetry(self, mollifier):
        pts = np.random.default_rng(1).uniform(-1, 1, size=(200, 3))
        np.testing.assert_array_equal(mollifier.profile(-pts), mollifier.profile(pts))

    def test_scaled_support(self, h1, mollifier):
        _, norm = h1
        pts = np.random.default_rng(2).uniform(-1, 1, size=(300, 3))
        eps = 0.3
        vals = mollifier.scaled(eps, pts)
        assert np.abs(vals[norm(pts) >= eps]).max() == 0.0
        assert (vals[norm(pts) < 0.5 * eps] > 0).all()

    def test_resolution_floor(self, h1):
        with pytest.raises(ValueError):
            MollifierFamily(h1[1], resolution=2)


class TestErosion:
    def test_subset_and_monotone(self, h1, omega):
        g, norm = h1
        small = erode_domain(g, norm, omega, 0.15)
        large = erode_domain(g, norm, omega, 0.4)
        assert large.is_subset(small)
        assert small.is_subset(omega)

    def test_right_distance_margin(self, h1, omega):
        g, norm = h1
        eps = 0.3
        eroded = erode_domain(g, norm, omega, eps)
        # every kept center is at right-distance > eps from the box boundary
        kept = eroded.centers()
        faces = np.abs(kept).max(axis=-1)
        assert (faces < 1.0).all()

    def test_rejects_nonpositive(self, h1, omega):
        g, norm = h1
        with pytest.raises(ValueError):
            erode_domain(g, norm, omega, 0.0)


class TestConvolve:
    def test_constant_is_fixed(self, h1, mollifier, omega):
        g, _ = h1
        u_eps = convolve(g, mollifier, 0.3, constant_field(g, -1.75), omega)
        pts = u_eps.domain.centers()
        assert np.abs(u_eps.values(pts) + 1.75).max() <= 1e-12

    def test_probe_is_fixed(self, h1, mollifier, omega):
        # symmetric mollifier: affine parts average out node by node
        g, _ = h1
        u = probe_field(g, np.array([0.8, -0.4]))
        u_eps = convolve(g, mollifier, 0.25, u, omega)
        pts = u_eps.domain.centers()
        assert np.abs(u_eps.values(pts) - u.values(pts)).max() <= 1e-12
        assert np.abs(u_eps.hgrad(pts) - u.hgrad(pts)).max() <= 1e-12

    def test_outside_eroded_domain_raises(self, h1, mollifier, omega):
        g, _ = h1
        u_eps = convolve(g, mollifier, 0.3, constant_field(g, 1.0), omega)
        with pytest.raises(DomainError):
            u_eps.values(np.array([[0.99, 0.99, 0.99]]))

    def test_empty_erosion_raises(self, h1, mollifier):
        g, _ = h1
        tiny = GridDomain.box(-0.1 * np.ones(3), 0.1 * np.ones(3), 4)
        with pytest.raises(DomainError):
            convolve(g, mollifier, 0.5, constant_field(g, 1.0), tiny)

    def test_euclidean_matches_direct_average(self):
        # independent oracle: on (R^2, +) the convolution is a plain
        # weighted average of shifted samples
        g = euclidean(2)
        norm = g.norm()
        mol = MollifierFamily(norm, resolution=7)
        omega = GridDomain.box(-np.ones(2), np.ones(2), 10)
        u = quadratic_field(g, 0.2, [1.0, -0.5], 0.3 * np.eye(2))
        eps = 0.3
        u_eps = convolve(g, mol, eps, u, omega)
        pts = u_eps.domain.centers()[:17]
        masses = mol.node_masses()
        direct = np.array([float(masses @ u.values(x - eps * mol.nodes)) for x in pts])
        np.testing.assert_allclose(u_eps.values(pts), direct, atol=1e-12)


class TestCommutation:
    def test_quadratic_residual_small(self, h1, mollifier, omega):
        g, _ = h1
        rng = np.random.default_rng(3)
        u = quadratic_field(g, 0.0, rng.normal(size=3), rng.normal(size=(3, 3)))
        for j in range(g.m):
            assert commutation_residual(g, mollifier, 0.3, u, omega, j) <= 1e-4

    def test_direction_out_of_range(self, h1, mollifier, omega):
        g, _ = h1
        with pytest.raises(ValueError):
            commutation_residual(g, mollifier, 0.3, constant_field(g, 0.0), omega, 5)


class TestConvergence:
    def test_errors_decrease(self, h1, mollifier, omega):
        g, norm = h1
        u = from_expression(g, "x1**2 - 0.5*x2*x3 + x3")
        inner = erode_domain(g, norm, omega, 0.45)
        rows = convergence_table(g, mollifier, u, omega, inner, 2.0, [0.4, 0.2, 0.1])
        lp = [r["Lp_err"] for r in rows]
        w1 = [r["W1p_err"] for r in rows]
        assert all(a > b for a, b in zip(lp, lp[1:]))
        assert all(a > b for a, b in zip(w1, w1[1:]))
        # second-order profile: quartering eps cuts both columns ~16x
        assert lp[-1] <= 0.25 * lp[0]
        assert w1[-1] <= 0.25 * w1[0]
