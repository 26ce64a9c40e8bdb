"""POVM containers, constructors, the entry oracle and serialization."""

import numpy as np
import pytest

from povmdt import (
    Basis,
    Povm,
    load_povm,
    make_parametric_element,
    make_sic_povm,
    matrix_entry_oracle,
    povm_from_walk,
    random_povm,
    save_povm,
)
from povmdt.linalg import is_hermitian, is_positive_semidefinite, random_unitary


class TestSic:
    def test_entry_values(self, sic):
        """Frozen (V,H) entries of the four elements."""
        s26 = np.sqrt(2) / 6
        w = np.exp(2j * np.pi / 3)
        expected = {1: 0.0, 2: -s26, 3: s26 * w.conjugate(), 4: s26 * w}
        for lab, val in expected.items():
            assert abs(matrix_entry_oracle(sic, lab, 1, 0) - val) < 1e-12

    def test_elements_are_valid_operators(self, sic):
        for _, e in sic:
            assert is_hermitian(e, 1e-12)
            assert is_positive_semidefinite(e, 1e-12)
            assert abs(np.trace(e).real - 0.5) < 1e-12

    def test_known_completeness_residual(self, sic):
        # the printed state set leaves an off-diagonal excess of sqrt(2)/3
        assert abs(sic.completeness_residual() - np.sqrt(2) / 3) < 1e-12

    def test_labels(self, sic):
        assert sic.labels == (1, 2, 3, 4)


class TestParametricElement:
    def test_projector_limit(self):
        np.testing.assert_allclose(
            make_parametric_element(0.0, 1.0, 0.0), np.diag([1.0, 0.0]), atol=0
        )

    def test_direct_substitution(self):
        got = make_parametric_element(np.pi / 4, 0.5, 0.25)
        np.testing.assert_allclose(got, 0.5 * np.array([[0.5, 0.25], [0.25, 0.5]]), atol=1e-15)
        assert np.linalg.eigvalsh(got).min() >= -1e-15

    def test_positivity_violation(self):
        with pytest.raises(ValueError, match="0.6"):
            make_parametric_element(np.pi / 4, 1.0, 0.6)

    def test_psd_whenever_precondition_holds(self, rng):
        for _ in range(50):
            theta = rng.uniform(0, np.pi)
            eta = rng.uniform(0.05, 1.0)
            bound = abs(np.cos(theta) * np.sin(theta))
            e01 = rng.uniform(0, bound) * np.exp(2j * np.pi * rng.uniform())
            m = make_parametric_element(theta, eta, e01)
            assert np.linalg.eigvalsh(m).min() >= -1e-12

    def test_eta_range(self):
        with pytest.raises(ValueError, match="eta"):
            make_parametric_element(0.0, 0.0, 0.0)


class TestWalkExtraction:
    def test_identity_walk(self):
        p = povm_from_walk(np.eye(6), 3, 2)
        np.testing.assert_allclose(p.element(0), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(p.element(1), np.zeros((2, 2)), atol=1e-15)
        np.testing.assert_allclose(p.element(2), np.zeros((2, 2)), atol=1e-15)

    def test_swap_like_permutation(self):
        """(0,c) -> (c,c) over two positions yields coin projectors."""
        u = np.eye(4, dtype=complex)[:, [0, 3, 2, 1]]  # swaps |0,1> and |1,1>
        assert np.abs(u[:, 1] - np.eye(4)[:, 3]).max() == 0
        p = povm_from_walk(u, 2, 2)
        np.testing.assert_allclose(p.element(0), np.diag([1.0, 0.0]), atol=1e-15)
        np.testing.assert_allclose(p.element(1), np.diag([0.0, 1.0]), atol=1e-15)

    def test_completeness_forced_by_unitarity(self, rng):
        for _ in range(5):
            u = random_unitary(12, rng)
            p = povm_from_walk(u, 4, 3)
            assert p.completeness_residual() < 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            povm_from_walk(np.ones((4, 4)), 2, 2)


class TestRandomPovm:
    def test_completeness(self):
        assert random_povm(2, 4, seed=7).completeness_residual() < 1e-12

    def test_psd(self):
        p = random_povm(3, 4, seed=1)
        for _, e in p:
            assert np.linalg.eigvalsh(e).min() >= -1e-12

    def test_deterministic(self):
        p1 = random_povm(3, 5, seed=42)
        p2 = random_povm(3, 5, seed=42)
        for (_, a), (_, b) in zip(p1, p2):
            np.testing.assert_array_equal(a, b)


class TestOracle:
    def test_hermiticity_pairing(self, small_random_povm):
        p = small_random_povm
        for lab in p.labels:
            for j in range(p.dim):
                for k in range(p.dim):
                    a = matrix_entry_oracle(p, lab, j, k)
                    b = matrix_entry_oracle(p, lab, k, j)
                    assert abs(a - b.conjugate()) < 1e-14

    def test_diagonal_real_in_unit_interval(self, small_random_povm):
        for lab in small_random_povm.labels:
            for j in range(small_random_povm.dim):
                v = matrix_entry_oracle(small_random_povm, lab, j, j)
                assert abs(v.imag) < 1e-14
                assert -1e-12 <= v.real <= 1 + 1e-12

    def test_non_computational_basis(self, small_random_povm, rng):
        basis = Basis(random_unitary(3, rng))
        e = small_random_povm.element(2)
        got = matrix_entry_oracle(small_random_povm, 2, 0, 2, basis)
        expected = np.vdot(basis.ket(0), e @ basis.ket(2))
        assert abs(got - expected) < 1e-14

    def test_out_of_range(self, sic):
        with pytest.raises(IndexError):
            matrix_entry_oracle(sic, 1, 0, 5)
        with pytest.raises(KeyError):
            matrix_entry_oracle(sic, 9, 0, 1)


class TestPovmContainer:
    def test_rejects_non_psd(self):
        with pytest.raises(ValueError, match="positive"):
            Povm([np.diag([1.0, -0.1]), np.diag([0.0, 1.1])])

    def test_rejects_incomplete_by_default(self):
        with pytest.raises(ValueError, match="identity"):
            Povm([np.diag([0.5, 0.5])])

    def test_duplicate_labels(self):
        with pytest.raises(ValueError, match="unique"):
            Povm([np.diag([0.5, 0.5])] * 2, labels=[1, 1])

    def test_elements_immutable(self, sic):
        with pytest.raises(ValueError):
            sic.element(1)[0, 0] = 9.0


class TestSerialization:
    def test_round_trip_lossless(self, small_random_povm, tmp_path):
        path = str(tmp_path / "povm.json")
        save_povm(small_random_povm, path)
        back = load_povm(path)
        assert back.labels == small_random_povm.labels
        for (_, a), (_, b) in zip(back, small_random_povm):
            np.testing.assert_array_equal(a, b)

    def test_sic_round_trip(self, sic, tmp_path):
        path = str(tmp_path / "sic.json")
        save_povm(sic, path)
        back = load_povm(path, check_complete=False)
        for (_, a), (_, b) in zip(back, sic):
            np.testing.assert_array_equal(a, b)


class TestBasis:
    def test_gram_validation(self):
        with pytest.raises(ValueError, match="orthonormal"):
            Basis(np.array([[1, 1], [0, 1]], dtype=complex))

    def test_computational(self):
        b = Basis.computational(3)
        assert b.is_computational()
        np.testing.assert_array_equal(b.ket(1), [0, 1, 0])
