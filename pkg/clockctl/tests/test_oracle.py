import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from clockctl.oracle import (
    BRANCH_PHASE_SIGN,
    analytic_branch_state,
    analytic_composite_state,
    analytic_reduced_state,
    calibrate_branch_sign,
    cumulative_coupling,
    overlap_kernel,
)
from clockctl.propagator import (
    free_clock_evolve,
    l2_distance,
    product_state,
    reduced_states,
    strang_evolve,
)
from clockctl.statelib import PureState, density_from_pure, fidelity, trace_distance

from .utils import small_model

PLUS = PureState.normalized([1.0, 1.0])


class CumulativeCouplingTest(SimpleTestCase):
    """Test G(x) = ∫_0^x g"""

    def setUp(self):
        self.config = small_model()
        self.x = self.config.grid.positions

    def test_zero_before_and_plateau_after(self):
        """Test G = 0 for x ≤ 0 and G = ∫g for x ≥ Δ with both methods"""
        for method in ("spectral", "trapezoid"):
            G = cumulative_coupling(self.config.coupling, method)
            self.assertFalse(np.any(G[self.x <= 0.0]))
            np.testing.assert_array_equal(G[self.x >= 1.0], self.config.coupling.integral)

    def test_methods_agree(self):
        """Test spectral and trapezoidal antiderivatives agree to the trapezoid error"""
        spectral = cumulative_coupling(self.config.coupling, "spectral")
        trapezoid = cumulative_coupling(self.config.coupling, "trapezoid")
        self.assertLess(np.max(np.abs(spectral - trapezoid)), 1e-4)

    def test_monotone_for_positive_coupling(self):
        """Test G is non-decreasing when g ≥ 0, up to spectral ringing"""
        G = cumulative_coupling(self.config.coupling)
        self.assertGreaterEqual(np.min(np.diff(G)), -1e-9)
        trapezoid = cumulative_coupling(self.config.coupling, "trapezoid")
        self.assertGreaterEqual(np.min(np.diff(trapezoid)), 0.0)

    def test_unknown_method(self):
        """Test an unknown method is rejected"""
        with self.assertRaises(ValidationError):
            cumulative_coupling(self.config.coupling, "simpson")


class OverlapTest(SimpleTestCase):
    """Test the branch overlap and the closed-form reduced state"""

    def setUp(self):
        self.config = small_model()
        self.G = cumulative_coupling(self.config.coupling)

    def test_overlap_before_and_after_transit(self):
        """Test w = 1 before the coupling region and the plateau phase after it"""
        before = overlap_kernel(self.config.packet, self.G)
        after = overlap_kernel(free_clock_evolve(self.config.packet, 2.5), self.G)
        plateau = np.exp(2j * BRANCH_PHASE_SIGN * self.config.g_integral)
        self.assertAlmostEqual(abs(before - 1.0), 0.0, places=12)
        self.assertAlmostEqual(abs(after - plateau), 0.0, places=12)

    def test_overlap_magnitude_at_most_one(self):
        """Test |w| ≤ 1 through the transit"""
        for t in np.linspace(0.0, 2.5, 11):
            w = overlap_kernel(free_clock_evolve(self.config.packet, t), self.G)
            self.assertLessEqual(abs(w), 1.0 + 1e-12)

    def test_reduced_state_rejects_unnormalized_coefficients(self):
        """Test |c0|² + |c1|² must be 1"""
        with self.assertRaises(ValidationError) as caught:
            analytic_reduced_state(1.0, 1.0, 1.0)
        self.assertEqual(caught.exception.code, "not_normalized")

    def test_dephased_state_differs_from_free(self):
        """Test the late reduced state does not agree with the freely evolved one"""
        c = 2**-0.5
        w = overlap_kernel(free_clock_evolve(self.config.packet, 2.5), self.G)
        rho = analytic_reduced_state(c, c, w)
        self.assertGreater(trace_distance(rho, density_from_pure(PLUS)), 0.5)
        self.assertAlmostEqual(rho.entries[0, 0].real, 0.5)


class ClosedFormTest(SimpleTestCase):
    """Test the closed form against the propagators"""

    def test_branch_sign_calibration(self):
        """Test the frozen branch sign matches the dense propagator"""
        self.assertEqual(calibrate_branch_sign(), BRANCH_PHASE_SIGN)

    def test_matches_strang_mid_transit(self):
        """Test closed form and Strang agree in L² and in ρ_s mid-transit"""
        config = small_model()
        start = product_state(config.packet, PLUS)
        split = strang_evolve(start, config, 1.0, 1e-3, estimate_error=False).state
        closed = analytic_composite_state(config, PLUS, 1.0)
        self.assertLess(l2_distance(split, closed), 1e-5)
        deviation = np.abs(reduced_states(split).system.entries - reduced_states(closed).system.entries)
        self.assertLess(np.max(deviation), 1e-6)

    def test_unsupported_coupling(self):
        """Test σ_x coupling has no closed form"""
        config = small_model(coupling="sigma_x")
        with self.assertRaises(ValidationError) as caught:
            analytic_composite_state(config, PLUS, 1.0)
        self.assertEqual(caught.exception.code, "oracle_unsupported")


class ReferenceValueTest(SimpleTestCase):
    """Test closed-form reference values"""

    def setUp(self):
        self.config = small_model()
        self.late = free_clock_evolve(self.config.packet, 2.5)

    def test_half_integral_at_bump_midpoint(self):
        """Test G(Δ/2) is half the target for the symmetric bump"""
        G = cumulative_coupling(self.config.coupling)
        middle = np.interp(0.5, self.config.grid.positions, G)
        self.assertAlmostEqual(middle, self.config.g_integral / 2, places=5)

    def test_zero_phase_is_identity(self):
        """Test G ≡ 0 leaves the branch state unchanged"""
        zero = np.zeros(self.config.grid.n)
        branch = analytic_branch_state(self.late, zero, 1)
        np.testing.assert_array_equal(branch.amplitudes, self.late.amplitudes)

    def test_plateau_overlaps(self):
        """Test w = −1 for ∫g = πħ/2 and w = +1 for ∫g = πħ"""
        for integral, expected in ((np.pi / 2, -1.0), (np.pi, 1.0)):
            G = cumulative_coupling(small_model(g_integral=integral).coupling)
            self.assertAlmostEqual(abs(overlap_kernel(self.late, G) - expected), 0.0, places=10)

    def test_reduced_state_reference_values(self):
        """Test w = 1 gives the pure state, w = 0 gives I/2, real w gives F = √((1 + w)/2)"""
        c = 2**-0.5
        plus = density_from_pure(PLUS)
        self.assertTrue(analytic_reduced_state(c, c, 1.0).is_pure())
        mixed = analytic_reduced_state(c, c, 0.0)
        np.testing.assert_allclose(mixed.entries, np.eye(2) / 2, atol=1e-15)
        self.assertAlmostEqual(fidelity(mixed, plus), 2**-0.5, places=10)
        for w in (-0.5, 0.3, 0.9):
            self.assertAlmostEqual(fidelity(analytic_reduced_state(c, c, w), plus), np.sqrt((1 + w) / 2), places=8)
