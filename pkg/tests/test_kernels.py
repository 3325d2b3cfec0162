"""
Unit tests for fundamental solutions and Poisson kernel constructions.
"""

import math

import numpy as np
import pytest

from core.errors import (
    CoincidentPoints,
    GridMismatch,
    NotLegendreHadamard,
    NotRadial,
    NotStronglyElliptic,
    SpecViolation,
    SplittingFailure,
)
from core.grid import integrate_kernel, make_grid
from core.kernels import (
    build_poisson,
    dual_frequencies,
    fundamental_solution,
    green_reflection,
    harmonic_fundamental_solution,
    harmonic_poisson,
    harmonic_profile,
    kernel_symbol,
    kernel_transpose,
    scalar_fundamental_solution,
    sphere_area,
    sphere_quadrature_fundamental_solution,
    stable_splitting,
    verify_poisson_properties,
)
from core.systems import lame, laplacian
from data.models import Construction, KernelMatrix, KernelMethod


class TestHarmonicKernel:
    """Tests for the closed-form harmonic kernel."""

    def test_sphere_area(self):
        """Test omega_1 = 2 pi and omega_2 = 4 pi."""
        assert sphere_area(2) == pytest.approx(2 * math.pi)
        assert sphere_area(3) == pytest.approx(4 * math.pi)

    def test_profile_at_origin(self):
        """Test P(0) = 2 / omega_{n-1}."""
        assert harmonic_profile(2)(np.zeros((1, 1)))[0] == pytest.approx(1 / math.pi)
        assert harmonic_profile(3)(np.zeros((1, 2)))[0] == pytest.approx(1 / (2 * math.pi))

    def test_periodized_slice_has_unit_mass(self, grid_1d):
        """Test that the wrapped slice integrates to 1 up to the image tail."""
        pc = harmonic_poisson(2, grid_1d)

        assert integrate_kernel(pc.slice(1.0))[0, 0].real == pytest.approx(1.0, abs=1e-2)

    def test_grid_dimension_must_match(self, grid_1d):
        """Test that a 3D kernel needs a 2D boundary grid."""
        with pytest.raises(GridMismatch):
            harmonic_poisson(3, grid_1d)

    def test_decay_constant_and_normalization(self, grid_1d):
        """Test P(x')(1 + |x'|^2) = 1/pi and the profile mass outside [-16, 16)."""
        report = verify_poisson_properties(harmonic_poisson(2, grid_1d))

        assert report["decay_constant"] == pytest.approx(1 / math.pi)
        expected_missing = 1.0 - 2.0 / math.pi * math.atan(16.0)
        assert report["normalization_error"] == pytest.approx(expected_missing, abs=1e-3)

    def test_finite_difference_order(self, grid_1d):
        """Test that the harmonicity residual converges at second order."""
        report = verify_poisson_properties(harmonic_poisson(2, grid_1d))

        assert 1.5 < report["fd_order"] < 2.5

    def test_harmonicity_height_follows_coarse_grids(self):
        """Test that the default stencil height rises to 8h on a coarse grid."""
        report = verify_poisson_properties(harmonic_poisson(2, make_grid(1, 16.0, 64)))

        assert report["fd_height"] == 4.0
        assert math.isfinite(report["fd_residual"])

    def test_harmonicity_stencil_must_stay_above_boundary(self, grid_1d):
        """Test that t0 <= 4h is rejected."""
        with pytest.raises(GridMismatch):
            verify_poisson_properties(harmonic_poisson(2, grid_1d), t0=0.25)

    def test_green_crosscheck(self, grid_2d):
        """Test E(x - ybar) against the Poisson integral of the boundary trace."""
        report = verify_poisson_properties(harmonic_poisson(3, grid_2d), extended=True)

        assert report["green_crosscheck_error"] < 1e-2


class TestFundamentalSolutions:
    """Tests for closed-form and quadrature fundamental solutions."""

    def test_newtonian_potential(self):
        """Test E(x) = -1 / (4 pi |x|) in R^3."""
        E = scalar_fundamental_solution(np.eye(3))
        x = np.array([[1.0, 2.0, 2.0]])

        assert E(x)[0, 0, 0].real == pytest.approx(-1.0 / (12.0 * math.pi))
        assert E.construction == Construction.HARMONIC_CLOSED_FORM
        assert E.radial

    def test_anisotropic_scalar_is_not_radial(self):
        """Test that div(A grad) with A = diag(1, 4) has a non-radial E."""
        E = scalar_fundamental_solution(np.diag([1.0, 4.0]))

        assert E.construction == Construction.SCALAR_CLOSED_FORM
        assert not E.radial

    def test_rejects_indefinite_matrix(self):
        """Test that a non-positive symmetric part is rejected."""
        with pytest.raises(NotStronglyElliptic):
            scalar_fundamental_solution(np.diag([1.0, -1.0]))

    def test_quadrature_matches_newtonian_potential(self):
        """Test the sphere-integral construction against -1 / (4 pi |x|)."""
        E = sphere_quadrature_fundamental_solution(laplacian(3))
        x = np.array([[1.0, 0.0, 0.0], [0.3, -0.5, 1.2], [2.0, 1.0, -1.0]])

        expected = -1.0 / (4.0 * math.pi * np.linalg.norm(x, axis=-1))

        assert np.allclose(E(x)[:, 0, 0].real, expected, rtol=1e-3)

    def test_quadrature_matches_logarithm_up_to_constant(self):
        """Test E(2e) - E(e) = log 2 / (2 pi) in the plane."""
        E = sphere_quadrature_fundamental_solution(laplacian(2))
        values = E(np.array([[0.6, 0.8], [1.2, 1.6]]))[:, 0, 0].real

        assert values[1] - values[0] == pytest.approx(math.log(2.0) / (2 * math.pi), abs=1e-3)

    def test_quadrature_is_even(self, lame211, rng):
        """Test E(-x) = E(x) for the Lame quadrature."""
        E = sphere_quadrature_fundamental_solution(lame211)
        x = rng.uniform(-2.0, 2.0, size=(6, 2))

        assert np.allclose(E(-x), E(x), rtol=1e-9, atol=1e-12)

    def test_dispatch(self, lame211):
        """Test closed form for the Laplacian and quadrature for Lame."""
        assert fundamental_solution(laplacian(2)).construction == Construction.HARMONIC_CLOSED_FORM

        E = fundamental_solution(lame211)

        assert E.construction == Construction.SPHERE_QUADRATURE
        assert not E.radial

    def test_green_function_vanishes_on_boundary(self):
        """Test G(x, y) = 0 for x on the boundary."""
        E = harmonic_fundamental_solution(3)

        G = green_reflection(E, [0.3, -0.2, 0.0], [0.0, 0.0, 1.0])

        assert np.max(np.abs(G)) < 1e-15

    def test_green_function_errors(self):
        """Test coincident points and non-radial solutions."""
        with pytest.raises(CoincidentPoints):
            green_reflection(harmonic_fundamental_solution(2), [0.0, 1.0], [0.0, 1.0])
        with pytest.raises(NotRadial):
            green_reflection(scalar_fundamental_solution(np.diag([1.0, 4.0])), [0.0, 1.0], [0.0, 2.0])


class TestStableSplitting:
    """Tests for the ordered Schur splitting of the boundary pencil."""

    def test_scalar_decaying_root(self):
        """Test tau^2 = |xi'|^2 has decaying root -|xi'|."""
        _, t11, roots = stable_splitting(np.eye(1), np.zeros((1, 1)), 4.0 * np.eye(1), 2.0)

        assert roots[0].real == pytest.approx(-2.0)
        assert t11[0, 0].real == pytest.approx(-2.0)

    def test_roots_on_imaginary_axis(self):
        """Test that a pencil without decaying roots fails."""
        with pytest.raises(SplittingFailure):
            stable_splitting(np.eye(1), np.zeros((1, 1)), -4.0 * np.eye(1), 2.0)


class TestPoissonConstructions:
    """Tests comparing the three constructions."""

    def test_radial_reflection_reproduces_harmonic_profile(self, grid_1d, laplace2):
        """Test 2 (d_n E)(x', 1) = 1 / (pi (1 + |x'|^2))."""
        radial = build_poisson(laplace2, grid_1d, KernelMethod.RADIAL_REFLECTION)
        explicit = build_poisson(laplace2, grid_1d, KernelMethod.HARMONIC_EXPLICIT)

        assert np.allclose(radial.profile.values, explicit.profile.values, atol=1e-12)

    def test_symbol_method_matches_harmonic_kernel(self, grid_1d, laplace2):
        """Test that the periodic symbol kernel agrees with the wrapped closed form."""
        symbolic = build_poisson(laplace2, grid_1d, KernelMethod.FOURIER_SYMBOL)
        explicit = build_poisson(laplace2, grid_1d, KernelMethod.HARMONIC_EXPLICIT)

        assert np.max(np.abs(symbolic.slice(1.0).values - explicit.slice(1.0).values)) < 1e-3

    def test_symbol_round_trip(self, grid_1d, laplace2):
        """Test that kernel_symbol recovers exp(-|xi'| t)."""
        pc = build_poisson(laplace2, grid_1d, KernelMethod.FOURIER_SYMBOL)
        xi = np.abs(dual_frequencies(grid_1d)[..., 0])

        recovered = kernel_symbol(pc.slice(2.0))[..., 0, 0]

        assert np.max(np.abs(recovered - np.exp(-2.0 * xi))) < 1e-10

    def test_lame_kernel_has_identity_mass(self, grid_1d, lame211):
        """Test int P = I for the Lame symbol kernel."""
        pc = build_poisson(lame211, grid_1d, KernelMethod.FOURIER_SYMBOL)

        assert np.allclose(integrate_kernel(pc.profile), np.eye(2), atol=1e-10)
        assert pc.metadata["max_basis_condition"] < 1e8

    def test_explicit_needs_laplacian(self, grid_1d, lame211):
        """Test that the explicit kernel is refused for Lame."""
        with pytest.raises(SpecViolation):
            build_poisson(lame211, grid_1d, KernelMethod.HARMONIC_EXPLICIT)

    def test_radial_refused_for_lame(self, grid_1d, lame211):
        """Test that radial reflection needs a radial fundamental solution."""
        with pytest.raises(NotRadial) as excinfo:
            build_poisson(lame211, grid_1d, KernelMethod.RADIAL_REFLECTION)
        assert excinfo.value.exit_code == 3

    def test_symbol_refused_without_legendre_hadamard(self, grid_1d):
        """Test that Lame(2, 1, -3) fails the Legendre-Hadamard gate."""
        with pytest.raises(NotLegendreHadamard):
            build_poisson(lame(2, 1.0, -3.0), grid_1d, KernelMethod.FOURIER_SYMBOL)

    def test_slices_are_cached(self, grid_1d, laplace2):
        """Test that repeated slices are the same object."""
        pc = build_poisson(laplace2, grid_1d, KernelMethod.HARMONIC_EXPLICIT)

        assert pc.slice(1.5) is pc.slice(1.5)

    def test_kernel_transpose(self, grid_1d):
        """Test that transposition swaps matrix indices."""
        values = np.zeros(grid_1d.shape + (2, 2))
        values[..., 0, 1] = 1.0
        kernel = KernelMatrix(grid_1d, 1.0, values)

        swapped = kernel_transpose(kernel)

        assert np.all(swapped.values[..., 1, 0] == 1.0)
        assert np.all(swapped.values[..., 0, 1] == 0.0)
