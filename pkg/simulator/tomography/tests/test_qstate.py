import numpy as np
from django.test import SimpleTestCase
from scipy.stats import kstest, unitary_group

from tomography.exceptions import DegenerateVectorError, DimensionMismatchError, InvalidDimensionError, InvalidStateError
from tomography.qstate import (
    DensityMatrix,
    Ket,
    LGModeLabel,
    basis_ket,
    fidelity,
    fidelity_mixed,
    fixed_order_basis,
    infidelity,
    normalize,
    random_density_matrix,
    random_haar_ket,
)


class KetTests(SimpleTestCase):
    def test_rejects_unnormalized_amplitudes(self):
        with self.assertRaises(InvalidStateError):
            Ket(np.array([1.0, 1.0]))

    def test_rejects_dimension_one(self):
        with self.assertRaises(InvalidDimensionError):
            Ket(np.array([1.0]))

    def test_amplitudes_are_read_only(self):
        ket = basis_ket(3, 1)
        with self.assertRaises(ValueError):
            ket.amps[0] = 1.0

    def test_normalize_zero_vector(self):
        with self.assertRaises(DegenerateVectorError):
            normalize(np.zeros(3))

    def test_global_phase_is_invisible_to_fidelity(self):
        psi = random_haar_ket(4, np.random.default_rng(3))
        rotated = Ket(np.exp(0.7j) * psi.amps)
        self.assertAlmostEqual(fidelity(psi, rotated), 1.0, places=12)


class BasisTests(SimpleTestCase):
    def test_qutrit_labels(self):
        self.assertEqual(
            fixed_order_basis(3),
            (LGModeLabel(-2, 0), LGModeLabel(0, 1), LGModeLabel(2, 0)),
        )

    def test_ququint_labels(self):
        labels = fixed_order_basis(5)
        self.assertEqual([(m.l, m.p) for m in labels], [(-4, 0), (-2, 1), (0, 2), (2, 1), (4, 0)])

    def test_every_label_has_the_basis_order(self):
        for dim in (2, 3, 5, 20):
            labels = fixed_order_basis(dim)
            self.assertEqual(len(set(labels)), dim)
            self.assertTrue(all(label.order == dim for label in labels))

    def test_negative_radial_index(self):
        with self.assertRaises(InvalidStateError):
            LGModeLabel(0, -1)


class HaarTests(SimpleTestCase):
    def test_population_of_first_mode_follows_beta_law(self):
        # |psi_0|^2 of a Haar qutrit has CDF 1 - (1 - x)^2.
        rng = np.random.default_rng(11)
        samples = [abs(random_haar_ket(3, rng).amps[0]) ** 2 for _ in range(4000)]
        result = kstest(samples, lambda x: 1.0 - (1.0 - x) ** 2)
        self.assertGreater(result.pvalue, 1e-3)

    def test_same_seed_same_state(self):
        a = random_haar_ket(5, np.random.default_rng(42))
        b = random_haar_ket(5, np.random.default_rng(42))
        np.testing.assert_array_equal(a.amps, b.amps)


class FidelityTests(SimpleTestCase):
    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x, y = random_haar_ket(4, rng), random_haar_ket(4, rng)
            self.assertAlmostEqual(fidelity(x, y), fidelity(y, x), places=14)
            self.assertTrue(0.0 <= fidelity(x, y) <= 1.0)

    def test_invariant_under_a_common_unitary(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            x, y = random_haar_ket(5, rng), random_haar_ket(5, rng)
            u = unitary_group.rvs(5, random_state=rng)
            self.assertAlmostEqual(fidelity(Ket(u @ x.amps), Ket(u @ y.amps)), fidelity(x, y), places=10)

    def test_orthogonal_basis_states(self):
        self.assertEqual(fidelity(basis_ket(3, 0), basis_ket(3, 2)), 0.0)
        self.assertEqual(infidelity(basis_ket(3, 1), basis_ket(3, 1)), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            fidelity(basis_ket(2, 0), basis_ket(3, 0))

    def test_mixed_fidelity_reduces_to_pure_overlap(self):
        rng = np.random.default_rng(8)
        x, y = random_haar_ket(3, rng), random_haar_ket(3, rng)
        self.assertAlmostEqual(
            fidelity_mixed(DensityMatrix.from_ket(x), DensityMatrix.from_ket(y)), fidelity(x, y), places=6
        )

    def test_maximally_mixed_against_pure(self):
        rho = DensityMatrix.maximally_mixed(3)
        self.assertAlmostEqual(fidelity_mixed(rho, DensityMatrix.from_ket(basis_ket(3, 0))), 1 / 3, places=10)


class DensityMatrixTests(SimpleTestCase):
    def test_rejects_non_hermitian(self):
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_rejects_negative_eigenvalue(self):
        with self.assertRaises(InvalidStateError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_random_rank_two_state(self):
        rng = np.random.default_rng(5)
        for measure in ('bures', 'hilbert-schmidt'):
            rho = random_density_matrix(3, 2, rng, measure)
            values = np.linalg.eigvalsh(rho.elements)
            self.assertLess(abs(values[0]), 1e-10)
            self.assertGreater(values[1], 1e-6)
            self.assertAlmostEqual(np.trace(rho.elements).real, 1.0, places=12)

    def test_purity_bounds(self):
        self.assertAlmostEqual(DensityMatrix.maximally_mixed(4).purity(), 0.25)
        self.assertAlmostEqual(DensityMatrix.from_ket(basis_ket(4, 2)).purity(), 1.0)
