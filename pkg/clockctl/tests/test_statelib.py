import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from clockctl.model import build_grid, bump_packet
from clockctl.propagator import CompositeState, product_state, reduced_states
from clockctl.statelib import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    density_from_pure,
    fidelity,
    fuchs_van_de_graaf_check,
    positive_part_projector,
    purity,
    random_density_matrix,
    random_pure_state,
    support_projector,
    trace_distance,
    von_neumann_entropy,
)

ZERO = PureState(np.array([1.0, 0.0]))
ONE = PureState(np.array([0.0, 1.0]))
PLUS = PureState.normalized([1.0, 1.0])


class DensityMatrixTest(SimpleTestCase):
    """Test DensityMatrix validation"""

    def test_accepts_pure_state_projector(self):
        """Test |+⟩⟨+| is a valid density matrix"""
        rho = density_from_pure(PLUS)
        self.assertEqual(rho.dim, 2)
        self.assertTrue(rho.is_pure())

    def test_rejects_non_hermitian(self):
        """Test a non-Hermitian matrix is rejected"""
        with self.assertRaises(ValidationError) as caught:
            DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]]))
        self.assertEqual(caught.exception.code, "not_hermitian")

    def test_rejects_wrong_trace(self):
        """Test trace must be one"""
        with self.assertRaises(ValidationError) as caught:
            DensityMatrix(np.eye(2))
        self.assertEqual(caught.exception.code, "trace")

    def test_rejects_negative_eigenvalue(self):
        """Test a Hermitian unit-trace matrix with a negative eigenvalue is rejected"""
        with self.assertRaises(ValidationError) as caught:
            DensityMatrix(np.array([[1.5, 0.0], [0.0, -0.5]]))
        self.assertEqual(caught.exception.code, "not_psd")

    def test_from_unnormalized_rescales(self):
        """Test partial-trace output is rescaled to unit trace"""
        rho = DensityMatrix.from_unnormalized(np.diag([2.0, 2.0]))
        np.testing.assert_allclose(rho.entries, np.eye(2) / 2)

    def test_pure_state_requires_normalization(self):
        """Test PureState rejects a vector of norm 2"""
        with self.assertRaises(ValidationError) as caught:
            PureState(np.array([2.0, 0.0]))
        self.assertEqual(caught.exception.code, "not_normalized")


class DistanceTest(SimpleTestCase):
    """Test fidelity and trace distance"""

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_identical_states(self):
        """Test F = 1 and D = 0 for identical states"""
        rho = random_density_matrix(2, self.rng)
        self.assertAlmostEqual(fidelity(rho, rho), 1.0, places=10)
        self.assertAlmostEqual(trace_distance(rho, rho), 0.0, places=12)

    def test_orthogonal_pure_states(self):
        """Test F = 0 and D = 2 for orthogonal pure states"""
        rho0, rho1 = density_from_pure(ZERO), density_from_pure(ONE)
        self.assertAlmostEqual(fidelity(rho0, rho1), 0.0, places=12)
        self.assertAlmostEqual(trace_distance(rho0, rho1), 2.0, places=12)

    def test_pure_fidelity_is_overlap(self):
        """Test F(|0⟩, |+⟩) = |⟨0|+⟩| = 1/√2"""
        value = fidelity(density_from_pure(ZERO), density_from_pure(PLUS))
        self.assertAlmostEqual(value, 2**-0.5, places=12)

    def test_ranges_and_fuchs_van_de_graaf(self):
        """Test F ∈ [0, 1], D ∈ [0, 2] and D ≤ 2√(1 − F²) on random pairs"""
        for dim, count in ((2, 1000), (3, 25), (4, 25)):
            for _ in range(count):
                rho0 = random_density_matrix(dim, self.rng)
                rho1 = random_density_matrix(dim, self.rng)
                F = fidelity(rho0, rho1)
                D = trace_distance(rho0, rho1)
                self.assertGreaterEqual(F, 0.0)
                self.assertLessEqual(F, 1.0)
                self.assertGreaterEqual(D, 0.0)
                self.assertLessEqual(D, 2.0 + 1e-12)
                self.assertTrue(fuchs_van_de_graaf_check(rho0, rho1))

    def test_fidelity_is_symmetric(self):
        """Test F(ρ0, ρ1) = F(ρ1, ρ0) within 1e-10 for mixed and pure/mixed pairs"""
        for dim in (2, 3):
            for _ in range(100):
                rho0 = random_density_matrix(dim, self.rng)
                rho1 = random_density_matrix(dim, self.rng)
                self.assertLess(abs(fidelity(rho0, rho1) - fidelity(rho1, rho0)), 1e-10)
                pure = density_from_pure(random_pure_state(dim, self.rng))
                self.assertLess(abs(fidelity(pure, rho1) - fidelity(rho1, pure)), 1e-10)

    def test_symmetric_against_maximally_mixed(self):
        """Test F(I/2, |+⟩⟨+|) = 1/√2 exactly in both orders"""
        mixed = DensityMatrix(np.eye(2) / 2)
        plus = density_from_pure(PLUS)
        self.assertAlmostEqual(fidelity(mixed, plus), 2**-0.5, places=14)
        self.assertAlmostEqual(fidelity(plus, mixed), 2**-0.5, places=14)

    def test_dimension_mismatch(self):
        """Test comparing a qubit with a qutrit fails"""
        with self.assertRaises(ValidationError) as caught:
            fidelity(density_from_pure(ZERO), DensityMatrix(np.eye(3) / 3))
        self.assertEqual(caught.exception.code, "dimension_mismatch")


class ProjectorTest(SimpleTestCase):
    """Test positive-part and support projectors"""

    def test_positive_part_of_zero_is_identity(self):
        """Test the zero eigenspace belongs to E⁺"""
        projector = positive_part_projector(HermitianOperator(np.zeros((2, 2))))
        np.testing.assert_allclose(projector.entries, np.eye(2))

    def test_positive_part_of_sigma_z(self):
        """Test E⁺ of σ_z projects on |0⟩"""
        projector = positive_part_projector(HermitianOperator(np.diag([1.0, -1.0])))
        np.testing.assert_allclose(projector.entries, np.diag([1.0, 0.0]), atol=1e-12)

    def test_support_of_pure_state(self):
        """Test the support of a pure state has rank one"""
        projector = support_projector(density_from_pure(PLUS), 1e-8)
        self.assertAlmostEqual(np.trace(projector.entries).real, 1.0)

    def test_support_threshold_must_be_positive(self):
        """Test ε = 0 is rejected"""
        with self.assertRaises(ValidationError):
            support_projector(density_from_pure(PLUS), 0.0)


class EntropyTest(SimpleTestCase):
    """Test purity and entropy"""

    def test_maximally_mixed_qubit(self):
        """Test purity 1/2 and entropy log 2"""
        rho = DensityMatrix(np.eye(2) / 2)
        self.assertAlmostEqual(purity(rho), 0.5)
        self.assertAlmostEqual(von_neumann_entropy(rho), np.log(2))

    def test_pure_state(self):
        """Test purity 1 and entropy 0"""
        rho = density_from_pure(random_pure_state(3, np.random.default_rng(1)))
        self.assertAlmostEqual(purity(rho), 1.0)
        self.assertAlmostEqual(von_neumann_entropy(rho), 0.0)


class ReferenceValueTest(SimpleTestCase):
    """Test closed-form reference values"""

    def setUp(self):
        self.zero = density_from_pure(ZERO)
        self.mixed = DensityMatrix(np.eye(2) / 2)

    def test_basis_projector(self):
        """Test |0⟩ gives diag(1, 0) and |+⟩ all entries 1/2"""
        np.testing.assert_allclose(self.zero.entries, np.diag([1.0, 0.0]))
        np.testing.assert_allclose(density_from_pure(PLUS).entries, np.full((2, 2), 0.5), atol=1e-15)

    def test_pure_against_maximally_mixed(self):
        """Test F(|0⟩⟨0|, I/2) = 1/√2 and D = 1"""
        self.assertAlmostEqual(fidelity(self.zero, self.mixed), 2**-0.5, places=10)
        self.assertAlmostEqual(trace_distance(self.zero, self.mixed), 1.0, places=12)

    def test_entropy_of_biased_mixture(self):
        """Test S(diag(0.9, 0.1)) = 0.32508 nats"""
        rho = DensityMatrix(np.diag([0.9, 0.1]))
        self.assertAlmostEqual(von_neumann_entropy(rho), 0.32508, places=5)

    def test_support_threshold(self):
        """Test eigenvalues at or below ε are outside the support"""
        rho = DensityMatrix(np.diag([1.0 - 1e-9, 1e-9]))
        np.testing.assert_allclose(support_projector(rho, 1e-6).entries, np.diag([1.0, 0.0]))
        np.testing.assert_allclose(support_projector(self.mixed, 1e-6).entries, np.eye(2))

    def test_triangle_inequality(self):
        """Test D(ρ0, ρ2) ≤ D(ρ0, ρ1) + D(ρ1, ρ2) on random triples"""
        rng = np.random.default_rng(11)
        for _ in range(25):
            rho0, rho1, rho2 = (random_density_matrix(3, rng) for _ in range(3))
            self.assertLessEqual(
                trace_distance(rho0, rho2),
                trace_distance(rho0, rho1) + trace_distance(rho1, rho2) + 1e-10,
            )

    def test_unitary_invariance(self):
        """Test F(UρU†, UσU†) = F(ρ, σ)"""
        rng = np.random.default_rng(5)
        rho0, rho1 = random_density_matrix(2, rng), random_density_matrix(2, rng)
        u = random_pure_state(2, rng).amplitudes
        # SU(2) element built from a random unit vector
        unitary = np.array([[u[0], -np.conj(u[1])], [u[1], np.conj(u[0])]])

        def rotate(rho):
            return DensityMatrix.from_unnormalized(unitary @ rho.entries @ unitary.conj().T)

        self.assertAlmostEqual(fidelity(rotate(rho0), rotate(rho1)), fidelity(rho0, rho1), places=8)


class PartialTraceMonotonicityTest(SimpleTestCase):
    """Test F can only grow when the clock is traced out"""

    def setUp(self):
        self.rng = np.random.default_rng(19)
        self.grid = build_grid(-2.0, 4.0, 64)

    def random_composite(self):
        amplitudes = self.rng.standard_normal((64, 2)) + 1j * self.rng.standard_normal((64, 2))
        amplitudes /= np.sqrt(self.grid.spacing * np.vdot(amplitudes, amplitudes).real)
        return CompositeState(self.grid, amplitudes)

    def joint_fidelity(self, theta0, theta1):
        return abs(self.grid.spacing * np.vdot(theta0.amplitudes, theta1.amplitudes))

    def test_reduced_fidelity_not_smaller(self):
        """Test F(ρ_s0, ρ_s1) ≥ |⟨Θ0|Θ1⟩| for random composite states"""
        for _ in range(50):
            theta0, theta1 = self.random_composite(), self.random_composite()
            reduced = fidelity(reduced_states(theta0).system, reduced_states(theta1).system)
            self.assertGreaterEqual(reduced, self.joint_fidelity(theta0, theta1) - 1e-12)

    def test_equality_for_shared_clock(self):
        """Test products with the same clock packet keep F = |⟨ψ0|ψ1⟩|"""
        phi = bump_packet(self.grid, 1.0)
        psi0, psi1 = random_pure_state(2, self.rng), random_pure_state(2, self.rng)
        theta0, theta1 = product_state(phi, psi0), product_state(phi, psi1)
        reduced = fidelity(reduced_states(theta0).system, reduced_states(theta1).system)
        self.assertAlmostEqual(reduced, self.joint_fidelity(theta0, theta1), places=10)
        self.assertAlmostEqual(reduced, abs(np.vdot(psi0.amplitudes, psi1.amplitudes)), places=10)
