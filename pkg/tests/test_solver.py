"""
Unit tests for the Dirichlet solver and the checks built on it.
"""

import math

import numpy as np
import pytest

from core.errors import (
    EmptyHeights,
    GridMismatch,
    InvalidAtom,
    InvalidHeights,
    SpecScreenFailed,
    SpecViolation,
)
from core.grid import band_limited_field, constant_field, indicator_interval, make_grid
from core.kernels import build_poisson
from core.solver import (
    atom_decay,
    auto_method,
    check_heights,
    default_heights,
    fatou_reconstruction,
    jump_mask,
    nt_domination,
    scaling_check,
    semigroup_check,
    semigroup_operator_bound,
    semigroup_refinement,
    solve,
    trace_convergence,
    wellposedness_table,
)
from data.field_store import atom_field
from data.models import AtomFlavor, BoundaryField, DirichletProblem, KernelMethod, Lebesgue


@pytest.fixture
def symbol_kernel(grid_1d, laplace2):
    return build_poisson(laplace2, grid_1d, KernelMethod.FOURIER_SYMBOL)


@pytest.fixture
def explicit_kernel(grid_1d, laplace2):
    return build_poisson(laplace2, grid_1d, KernelMethod.HARMONIC_EXPLICIT)


class TestHeights:
    """Tests for height validation."""

    def test_default_heights(self, grid_1d):
        """Test geometric heights from 2h up to R/8."""
        assert default_heights(grid_1d) == pytest.approx((0.125, 0.25, 0.5, 1.0, 2.0))

    def test_default_heights_ratio(self, grid_1d):
        """Test that the ratio must exceed 1."""
        with pytest.raises(InvalidHeights):
            default_heights(grid_1d, ratio=1.0)

    def test_check_heights_sorts_and_deduplicates(self, grid_1d):
        """Test that heights come back sorted and unique."""
        assert check_heights(grid_1d, [1.0, 0.5, 1.0]) == (0.5, 1.0)

    def test_check_heights_errors(self, grid_1d):
        """Test empty lists and heights below 2h."""
        with pytest.raises(EmptyHeights):
            check_heights(grid_1d, [])
        with pytest.raises(InvalidHeights):
            check_heights(grid_1d, [0.1])
        with pytest.raises(InvalidHeights):
            check_heights(grid_1d, [math.inf])

    def test_auto_method(self, laplace2, lame211):
        """Test explicit kernel for the Laplacian, symbol method otherwise."""
        assert auto_method(laplace2) == KernelMethod.HARMONIC_EXPLICIT
        assert auto_method(lame211) == KernelMethod.FOURIER_SYMBOL


class TestSolve:
    """Tests for the FFT Dirichlet solve."""

    def test_constant_datum_is_preserved(self, grid_1d, laplace2, symbol_kernel):
        """Test that u = c when f = c."""
        prob = DirichletProblem(laplace2, constant_field(grid_1d, [3.0]), (0.25, 1.0))

        u = solve(prob, symbol_kernel)

        assert u.values.shape == (2, 512, 1)
        assert np.max(np.abs(u.values - 3.0)) < 1e-12

    def test_constant_vector_datum_for_lame(self, grid_1d, lame211):
        """Test that the Lame kernel reproduces constant vectors."""
        prob = DirichletProblem(lame211, constant_field(grid_1d, [1.0, -2.0]), (0.5,))

        u = solve(prob)

        assert np.allclose(u.values[0], [1.0, -2.0], atol=1e-10)

    def test_translation_equivariance(self, grid_1d, laplace2, symbol_kernel, rng):
        """Test that shifting f by whole nodes shifts u by the same nodes."""
        f = band_limited_field(grid_1d, 1, rng)
        shifted = BoundaryField(grid_1d, np.roll(f.values, 7, axis=0))

        u = solve(DirichletProblem(laplace2, f, (0.25, 1.0)), symbol_kernel)
        v = solve(DirichletProblem(laplace2, shifted, (0.25, 1.0)), symbol_kernel)

        assert np.allclose(v.values, np.roll(u.values, 7, axis=1), atol=1e-12)

    def test_channel_mismatch(self, grid_1d, laplace2):
        """Test that the datum must have M channels."""
        prob = DirichletProblem(laplace2, constant_field(grid_1d, [1.0, 1.0]), (1.0,))

        with pytest.raises(GridMismatch):
            solve(prob)

    def test_kernel_grid_mismatch(self, laplace2, symbol_kernel):
        """Test that a prebuilt kernel must share the datum's grid."""
        other = make_grid(1, 8.0, 512)
        prob = DirichletProblem(laplace2, constant_field(other, [1.0]), (1.0,))

        with pytest.raises(GridMismatch):
            solve(prob, symbol_kernel)

    def test_heights_below_two_h(self, grid_1d, laplace2, symbol_kernel):
        """Test that heights below 2h are rejected."""
        prob = DirichletProblem(laplace2, constant_field(grid_1d, [1.0]), (0.01,))

        with pytest.raises(InvalidHeights):
            solve(prob, symbol_kernel)


class TestBoundaryBehaviour:
    """Tests for trace convergence and nontangential domination."""

    def test_jump_mask_marks_neighbourhood(self, grid_1d):
        """Test that nodes within 4h of a jump are excluded."""
        mask = jump_mask(indicator_interval(grid_1d, -1.0, 1.0))

        x = grid_1d.axis
        assert mask[np.argmin(np.abs(x - 1.0))]
        assert not mask[grid_1d.origin_index]
        assert not mask[np.argmin(np.abs(x - 2.0))]

    def test_trace_convergence_rate(self, grid_1d, laplace2, explicit_kernel):
        """Test that u approaches an interval indicator as t decreases."""
        f = indicator_interval(grid_1d, -1.0, 1.0)
        u = solve(DirichletProblem(laplace2, f, default_heights(grid_1d)), explicit_kernel)

        report = trace_convergence(u, f)

        deviations = report["vertical_deviation"]
        assert all(a < b for a, b in zip(deviations, deviations[1:]))
        assert report["deviation_at_min_height"] < 0.5
        assert report["rate"] > 0

    def test_nt_domination_needs_enough_trials(self, grid_1d, laplace2):
        """Test that fewer than 10 random trials are refused."""
        prob = DirichletProblem(laplace2, constant_field(grid_1d, [1.0]), (1.0,))

        with pytest.raises(SpecViolation):
            nt_domination(prob, trials=3)

    def test_nt_domination_is_bounded(self, grid_1d, laplace2, explicit_kernel):
        """Test that N u / M f stays moderate for the harmonic kernel."""
        prob = DirichletProblem(laplace2, constant_field(grid_1d, [1.0]), default_heights(grid_1d))

        report = nt_domination(prob, trials=10, seed=3, pc=explicit_kernel)

        assert report["trials"] == 10
        assert 0.0 < report["max_ratio"] < 25.0


class TestSemigroup:
    """Tests for the semigroup identity and Fatou reconstruction."""

    def test_symbol_kernel_is_exact_semigroup(self, symbol_kernel):
        """Test P_1 * P_1 = P_2 to rounding for the periodic symbol kernel."""
        report = semigroup_check(symbol_kernel, 1.0, 1.0)

        assert report["residual"] < 1e-10
        assert report["commutator"] < 1e-12
        assert report["delta_identity"] < 1e-12

    def test_explicit_kernel_within_tail_tolerance(self, explicit_kernel):
        """Test that the wrapped closed form satisfies the identity up to its tail."""
        assert semigroup_check(explicit_kernel, 1.0, 1.0)["residual"] < 1e-3

    def test_refinement_shrinks_wrapped_tail(self, laplace2):
        """Test that doubling the box at fixed h does not increase the residual."""
        report = semigroup_refinement(laplace2, KernelMethod.HARMONIC_EXPLICIT, 1, 16.0, 512)

        assert report["improved"]
        assert report["fine_residual"] < 1e-3

    def test_heights_out_of_range(self, symbol_kernel):
        """Test that t1 + t2 above R/8 is rejected."""
        with pytest.raises(InvalidHeights):
            semigroup_check(symbol_kernel, 2.0, 2.0)

    def test_fatou_reconstruction(self, grid_1d, laplace2, symbol_kernel, rng):
        """Test u(., T) = P_{T - t} * u(., t)."""
        f = band_limited_field(grid_1d, 1, rng)
        u = solve(DirichletProblem(laplace2, f, (0.25, 1.0)), symbol_kernel)

        report = fatou_reconstruction(u, symbol_kernel, 0.25, 1.0)

        assert report["residual"] < 1e-10

    def test_fatou_errors(self, grid_1d, laplace2, symbol_kernel):
        """Test ordering and stored-height checks."""
        u = solve(DirichletProblem(laplace2, constant_field(grid_1d, [1.0]), (0.25, 1.0)), symbol_kernel)

        with pytest.raises(InvalidHeights):
            fatou_reconstruction(u, symbol_kernel, 1.0, 0.25)
        with pytest.raises(InvalidHeights):
            fatou_reconstruction(u, symbol_kernel, 0.5, 1.0)


class TestAtomDecay:
    """Tests for nontangential decay of atomic data."""

    def test_h1_atom_decays_like_distance_to_minus_n(self, reference_grid, laplace2):
        """Test a fitted decay exponent close to n = 2."""
        center, side = (0.0,), 0.5
        datum = atom_field(reference_grid, center, side)
        prob = DirichletProblem(
            laplace2, datum, default_heights(reference_grid, 2.0 ** 0.25), KernelMethod.HARMONIC_EXPLICIT
        )

        report = atom_decay(prob, (center, side))

        assert 1.6 < report["decay_exponent"] < 2.4
        assert 0.0 < report["off_cube_constant"] < math.inf
        assert 0.0 < report["nu_mass"] < math.inf

    def test_central_atom_reports_beurling_norm(self, grid_1d, laplace2, explicit_kernel):
        """Test that central atoms also report the Beurling norm of N u."""
        datum = atom_field(grid_1d, (0.0,), 1.0)
        prob = DirichletProblem(laplace2, datum, default_heights(grid_1d))

        report = atom_decay(prob, ((0.0,), 1.0), AtomFlavor.BEURLING_CENTRAL, pc=explicit_kernel)

        assert 0.0 < report["nu_beurling_norm"] < math.inf

    def test_rejects_non_atom(self, grid_1d, laplace2, explicit_kernel):
        """Test that an indicator is not an atom."""
        prob = DirichletProblem(laplace2, indicator_interval(grid_1d, -1.0, 1.0), (1.0,))

        with pytest.raises(InvalidAtom):
            atom_decay(prob, ((0.0,), 2.0), pc=explicit_kernel)


class TestNormTables:
    """Tests for the norm-ratio tables and the dilation check."""

    def test_wellposedness_row(self, grid_1d, laplace2):
        """Test one (system, spec) row."""
        rows = wellposedness_table([laplace2], [Lebesgue(2.0)], grid_1d, trials=3)

        assert len(rows) == 1
        assert rows[0]["spec"] == "L^2"
        assert rows[0]["trials"] == 3
        assert 0.5 < rows[0]["max_ratio"] < 25.0

    def test_wellposedness_screen(self, grid_1d, laplace2):
        """Test that L^1 fails its maximal-operator screen."""
        with pytest.raises(SpecScreenFailed):
            wellposedness_table([laplace2], [Lebesgue(1.0)], grid_1d, trials=3)

    def test_semigroup_is_a_contraction_on_l2(self, symbol_kernel):
        """Test ||P_t * f||_2 <= ||f||_2."""
        report = semigroup_operator_bound(symbol_kernel, Lebesgue(2.0), trials=5)

        assert report["max_ratio"] <= 1.0 + 1e-9
        assert report["flatness"] >= 1.0

    def test_scaling(self, grid_1d):
        """Test u_2(x', t) = u(2x', 2t) for a Gaussian datum."""
        report = scaling_check(lambda x: np.exp(-x[..., 0] ** 2), grid_1d, (0.25, 0.5, 1.0, 2.0))

        assert report["heights_compared"] == 3
        assert report["max_error"] < 1e-2

    def test_scaling_factor_must_be_integer(self, grid_1d):
        """Test that non-integer dilations are rejected."""
        with pytest.raises(SpecViolation):
            scaling_check(lambda x: np.exp(-x[..., 0] ** 2), grid_1d, (1.0,), lam=1.5)
