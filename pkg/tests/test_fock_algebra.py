import math

import numpy as np
import pytest

from conftest import random_density_matrix
from wehrlflux.errors import (
    DimensionError,
    StateValidationError,
    TruncationError,
)
from wehrlflux.fock_algebra import (
    CoherentStateVector,
    DensityMatrix,
    annihilation,
    coherent_components,
    coherent_state,
    creation,
    expectation,
    number_operator,
    trace_distance,
    unvectorize,
    vectorize,
    von_neumann_entropy,
)


class TestLadderOperators:
    def test_annihilation_entries(self):
        a = annihilation(3).dense()
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 1] = 1.0
        expected[1, 2] = math.sqrt(2.0)
        assert np.allclose(a, expected)

    def test_vacuum_annihilated(self):
        a = annihilation(6).dense()
        vac = np.zeros(6)
        vac[0] = 1.0
        assert np.allclose(a @ vac, 0.0)

    def test_number_operator_spectrum(self):
        n_max = 9
        a = annihilation(n_max).dense()
        num = a.conj().T @ a
        assert np.allclose(np.sort(np.linalg.eigvalsh(num)), np.arange(n_max))
        assert np.allclose(num, number_operator(n_max).dense())

    def test_invalid_dimension(self):
        with pytest.raises(DimensionError):
            annihilation(1)

    @pytest.mark.parametrize("n_max", [4, 16, 65, 90])
    def test_commutator_defect_confined_to_top_level(self, n_max):
        a = annihilation(n_max).dense()
        ad = creation(n_max).dense()
        comm = a @ ad - ad @ a
        defect = comm - np.eye(n_max)
        # truncation pushes the whole defect into the top Fock level
        assert abs(defect[n_max - 1, n_max - 1] + n_max) < 1e-12
        defect[n_max - 1, n_max - 1] = 0.0
        assert np.max(np.abs(defect)) < 1e-12

    def test_sparse_storage_above_limit(self):
        import scipy.sparse as sp

        assert isinstance(annihilation(64).entries, np.ndarray)
        assert sp.issparse(annihilation(65).entries)


class TestCoherentStates:
    def test_vacuum_amplitude(self):
        st = coherent_state(0.0, 8)
        assert st.components[0] == 1.0
        assert np.allclose(st.components[1:], 0.0)
        assert st.leakage < 1e-15

    def test_components_match_direct_formula(self):
        mu = 0.7 - 0.4j
        c = coherent_components(mu, 12)
        direct = np.array(
            [
                math.exp(-abs(mu) ** 2 / 2) * mu ** n / math.sqrt(math.factorial(n))
                for n in range(12)
            ]
        )
        assert np.max(np.abs(c - direct)) < 1e-14

    def test_overlap_against_analytic(self):
        # |<mu|nu>|^2 -> exp(-|mu-nu|^2); partial-sum evaluation at n_max=40
        mu, nu = 1.0, 0.0
        c_mu = coherent_state(mu, 40).components
        c_nu = coherent_state(nu, 40).components
        overlap = abs(np.vdot(c_mu, c_nu)) ** 2
        assert abs(overlap - math.exp(-abs(mu - nu) ** 2)) < 1e-10

    def test_mean_photon_number(self):
        mu = 1.5
        rho = DensityMatrix.coherent(mu, 40)
        n = expectation(rho, number_operator(40))
        assert abs(n.real - abs(mu) ** 2) < 1e-8

    def test_truncation_guard(self):
        with pytest.raises(TruncationError) as err:
            coherent_state(4.0, 10)
        assert err.value.required_n_max > 10

    @pytest.mark.parametrize("mu", [0.5, 1.0 + 1.0j, 2.2])
    def test_leakage_monotone_in_cutoff(self, mu):
        leaks = [coherent_state(mu, n, fill_ratio=10.0).leakage for n in (8, 12, 16, 24, 40)]
        assert all(l1 >= l2 - 1e-16 for l1, l2 in zip(leaks, leaks[1:]))
        assert leaks[-1] < 1e-10

    def test_large_amplitude_is_finite(self):
        # log-gamma path: no overflow far beyond n = 170
        c = coherent_components(13.0, 400)
        assert np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))
        assert abs(np.vdot(c, c).real - 1.0) < 1e-12


class TestDensityMatrix:
    def test_vacuum_and_fock(self):
        vac = DensityMatrix.vacuum(5)
        assert vac.entries[0, 0] == 1.0
        f2 = DensityMatrix.fock(5, 2)
        assert expectation(f2, number_operator(5)).real == pytest.approx(2.0)

    def test_thermal_occupation(self):
        rho = DensityMatrix.thermal(1.0, 60)
        assert expectation(rho, number_operator(60)).real == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_hermitian(self):
        m = np.eye(4, dtype=complex)
        m[0, 1] = 1e-3
        m /= np.trace(m)
        with pytest.raises(StateValidationError):
            DensityMatrix(4, m)

    def test_rejects_bad_trace(self):
        with pytest.raises(StateValidationError):
            DensityMatrix(4, 2.0 * np.eye(4, dtype=complex) / 4)

    def test_rejects_negative_eigenvalue(self):
        m = np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex)
        with pytest.raises(StateValidationError):
            DensityMatrix(4, m)


class TestExpectation:
    def test_vacuum_photon_number(self):
        assert expectation(DensityMatrix.vacuum(6), number_operator(6)) == 0

    def test_coherent_eigenvalue_property(self):
        rho = DensityMatrix.coherent(1.0, 40)
        val = expectation(rho, annihilation(40))
        assert abs(val - 1.0) < 1e-10

    def test_maximally_mixed(self):
        rho = DensityMatrix.maximally_mixed(4)
        assert expectation(rho, number_operator(4)).real == pytest.approx(1.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            expectation(DensityMatrix.vacuum(5), annihilation(6))

    def test_linear_and_conjugate_symmetric(self):
        rng = np.random.default_rng(7)
        dim = 8
        rho = random_density_matrix(dim, rng)
        from wehrlflux.fock_algebra import FockOperator

        m1 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        m2 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        o1, o2 = FockOperator(dim, m1), FockOperator(dim, m2)
        lhs = expectation(rho, FockOperator(dim, 2.0 * m1 + 0.5j * m2))
        rhs = 2.0 * expectation(rho, o1) + 0.5j * expectation(rho, o2)
        assert abs(lhs - rhs) < 1e-12
        assert abs(
            expectation(rho, o1.dag()) - np.conj(expectation(rho, o1))
        ) < 1e-12


class TestHelpers:
    def test_vectorize_round_trip_column_stacking(self):
        m = np.arange(9, dtype=complex).reshape(3, 3)
        v = vectorize(m)
        # column stacking: first entries run down the first column
        assert np.allclose(v[:3], m[:, 0])
        assert np.allclose(unvectorize(v, 3), m)

    def test_von_neumann_entropy(self):
        rho = DensityMatrix.maximally_mixed(4)
        assert von_neumann_entropy(rho) == pytest.approx(math.log(4))
        assert von_neumann_entropy(DensityMatrix.vacuum(4)) == pytest.approx(0.0, abs=1e-12)

    def test_trace_distance(self):
        a = DensityMatrix.vacuum(4)
        b = DensityMatrix.fock(4, 1)
        assert trace_distance(a, b) == pytest.approx(1.0)
        assert trace_distance(a, a) == pytest.approx(0.0, abs=1e-14)
