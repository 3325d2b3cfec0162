"""
Unit tests for elliptic systems and the ellipticity checks.
"""

import numpy as np
import pytest

from core.errors import InvalidGrid
from core.systems import (
    from_coefficients,
    lame,
    laplacian,
    legendre_hadamard,
    pencil,
    strong_ellipticity,
    symbol,
    transpose,
    unit_sphere_samples,
    weak_ellipticity,
)


class TestConstructors:
    """Tests for the system constructors."""

    def test_laplacian_symbol_is_identity_times_norm(self, laplace3):
        """Test symbol(xi) = |xi|^2 I for the Laplacian."""
        xi = np.array([1.0, -2.0, 0.5])

        assert np.allclose(symbol(laplace3, xi), 5.25 * np.eye(1))

    def test_lame_symbol(self):
        """Test symbol(xi) = mu |xi|^2 I + (lambda + mu) xi xi^T."""
        sys = lame(3, 2.0, 0.5)
        xi = np.array([0.3, -1.0, 2.0])

        expected = 2.0 * xi @ xi * np.eye(3) + 2.5 * np.outer(xi, xi)
        assert np.allclose(symbol(sys, xi), expected)

    def test_symbol_is_vectorized(self, lame211):
        """Test that leading axes of xi are kept."""
        xi = np.ones((4, 5, 2))

        assert symbol(lame211, xi).shape == (4, 5, 2, 2)

    def test_from_coefficients_validates_shape(self):
        """Test that a non-square coefficient tensor is rejected."""
        with pytest.raises(InvalidGrid):
            from_coefficients(np.zeros((2, 3, 2, 2)))

    def test_dimension_limited_to_two_and_three(self):
        """Test that only n in {2, 3} is supported."""
        with pytest.raises(InvalidGrid):
            laplacian(4)

    def test_transpose_is_involution(self, rng):
        """Test (L^T)^T = L for random complex coefficients."""
        coeff = rng.standard_normal((2, 2, 3, 3)) + 1j * rng.standard_normal((2, 2, 3, 3))
        sys = from_coefficients(coeff)

        assert np.array_equal(transpose(transpose(sys)).coeff, sys.coeff)

    def test_lame_is_self_transposed(self, lame211):
        """Test that the Lame tensor is invariant under transposition."""
        assert np.allclose(transpose(lame211).coeff, lame211.coeff)


class TestPencil:
    """Tests for the boundary pencil coefficients."""

    def test_laplacian_pencil(self, laplace2):
        """Test A_nn = I, B = 0 and C = |xi'|^2 for the Laplacian."""
        a_nn, b, c = pencil(laplace2, np.array([3.0]))

        assert np.allclose(a_nn, np.eye(1))
        assert np.allclose(b, 0)
        assert np.allclose(c, 9.0)

    def test_pencil_reassembles_symbol(self, rng):
        """Test A tau^2 + B tau + C = symbol((xi', tau)) with real tau."""
        coeff = rng.standard_normal((2, 2, 2, 2))
        sys = from_coefficients(coeff)
        xi_t, tau = np.array([0.7]), -1.3

        a_nn, b, c = pencil(sys, xi_t)

        assert np.allclose(a_nn * tau ** 2 + b * tau + c, symbol(sys, np.array([0.7, tau])))


class TestSphereSamples:
    """Tests for the direction sampler."""

    def test_unit_norm_and_count(self):
        """Test that samples lie on the unit sphere."""
        points = unit_sphere_samples(3, 100, seed=1)

        assert points.shape == (100, 3)
        assert np.allclose(np.linalg.norm(points, axis=-1), 1.0)


class TestLegendreHadamard:
    """Tests for the Legendre-Hadamard and Legendre constants."""

    def test_laplacian_constant_is_one(self, laplace2):
        """Test kappa_o = 1 for the Laplacian."""
        report = legendre_hadamard(laplace2, samples=256)

        assert report.kappa_o == pytest.approx(1.0, abs=1e-8)
        assert report.weakly_elliptic

    def test_lame_constant(self):
        """Test min_ratio = min(mu, lambda + 2 mu) for Lame."""
        report = legendre_hadamard(lame(2, 1.0, 1.0), samples=256)

        assert report.min_ratio == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(report.argmin_xi) == pytest.approx(1.0)
        assert np.linalg.norm(report.argmin_eta) == pytest.approx(1.0)

    def test_lame_sweep_sign(self):
        """Test the sign of min_ratio over mu in {0.5, 1, 2}, lambda in {-3..3}."""
        for mu in (0.5, 1.0, 2.0):
            for lam in range(-3, 4):
                expected = min(mu, lam + 2 * mu)
                report = legendre_hadamard(lame(2, mu, float(lam)), samples=256)
                if expected == 0:
                    assert abs(report.min_ratio) < 1e-8
                else:
                    assert np.sign(report.min_ratio) == np.sign(expected)
                    assert report.min_ratio == pytest.approx(expected, abs=1e-6)

    def test_failing_lame_has_zero_kappa(self):
        """Test that Lame(2, 1, -3) fails the gate with kappa_o = 0."""
        report = legendre_hadamard(lame(2, 1.0, -3.0), samples=256)

        assert report.kappa_o == 0.0
        assert report.min_ratio == pytest.approx(-1.0, abs=1e-6)

    def test_weak_ellipticity_detects_degenerate_lame(self):
        """Test that det symbol vanishes when lambda + 2 mu = 0."""
        assert not weak_ellipticity(lame(2, 0.5, -1.0), samples=256)
        assert weak_ellipticity(lame(2, 1.0, -3.0), samples=256)

    def test_strong_ellipticity_of_lame(self):
        """Test the Legendre constant mu + min(0, n (lambda + mu))."""
        assert strong_ellipticity(lame(2, 1.0, 1.0)) == pytest.approx(1.0)
        assert strong_ellipticity(lame(2, 1.0, -3.0)) == pytest.approx(-3.0)
