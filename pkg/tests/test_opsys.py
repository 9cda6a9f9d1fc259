import numpy as np
import pytest

from ncbase import matcore, opsys, sampling

from conftest import random_hermitian


def pauli_x_system():
    return opsys.make_opsys([np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])], field="C")


class TestMakeOpsys:
    def test_two_dimensional(self):
        s = pauli_x_system()
        assert s.dim == 2 and s.d == 2

    def test_unit_not_in_span(self):
        with pytest.raises(opsys.OpsysError):
            opsys.make_opsys([np.diag([1.0, 0.0])])

    def test_full_matrix_algebra(self, m2):
        assert m2.dim == 4

    def test_dependent_generators_deduplicated(self):
        s = opsys.make_opsys([np.eye(2), 2 * np.eye(2), np.diag([1.0, -1.0])], field="R")
        assert s.dim == 2

    def test_adjoint_closure_augments(self):
        e12 = np.zeros((2, 2))
        e12[0, 1] = 1.0
        s = opsys.make_opsys([np.eye(2), e12], field="C")
        assert s.dim == 3  # span{I, E12, E21}
        assert s.in_span(e12.T)

    def test_empty_rejected(self):
        with pytest.raises(opsys.OpsysError):
            opsys.make_opsys([])

    def test_basis_orthonormal(self, m2):
        g = np.array([[np.vdot(a, b) for b in m2.basis] for a in m2.basis])
        np.testing.assert_allclose(g, np.eye(4), atol=1e-12)


class TestAmbient:
    def test_unit_level_one(self, m2):
        np.testing.assert_allclose(opsys.ambient(opsys.unit(m2)), np.eye(2), atol=1e-12)

    def test_unit_level_n(self, m2):
        np.testing.assert_allclose(opsys.ambient(opsys.unit(m2, 3)), np.eye(6), atol=1e-12)

    def test_single_entry_coefficient(self):
        s = pauli_x_system()
        b = s.basis[1]
        coeffs = np.zeros((2, 2, 2))
        coeffs[1, 0, 1] = 1.0  # e12 block on basis element 1
        x = opsys.element(s, coeffs)
        amb = opsys.ambient(x)
        np.testing.assert_allclose(amb[:2, 2:], b, atol=1e-12)
        np.testing.assert_allclose(amb[:2, :2], 0.0, atol=1e-12)

    def test_from_ambient_roundtrip(self, m2, rng):
        x = sampling.random_element(m2, 2, rng)
        y = opsys.from_ambient(m2, opsys.ambient(x))
        np.testing.assert_allclose(y.coeffs, x.coeffs, atol=1e-10)

    def test_from_ambient_rejects_off_subspace(self, diag3):
        off = np.zeros((3, 3))
        off[0, 1] = 1.0
        with pytest.raises(opsys.OpsysError):
            opsys.from_ambient(diag3, off)


class TestPositivity:
    def test_unit_positive(self, m2):
        assert opsys.is_positive(opsys.unit(m2))

    def test_negated_unit(self, m2):
        assert not opsys.is_positive(-1.0 * opsys.unit(m2))

    def test_concrete_combination(self):
        s = pauli_x_system()
        # 2 I + 1 sigma_x has eigenvalues 1, 3
        x = opsys.from_ambient(s, 2 * np.eye(2) + np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert opsys.is_positive(x)

    def test_rejects_nonselfadjoint(self, m2, rng):
        x = sampling.random_element(m2, 1, rng)
        with pytest.raises(opsys.OpsysError):
            opsys.is_positive(x)


class TestNorms:
    def test_diagonal_element(self, diag3):
        x = opsys.from_ambient(diag3, np.diag([1.0, -1.0, 0.0]))
        assert opsys.order_unit_norm(x) == pytest.approx(1.0)

    def test_unit_norm_one(self, m2):
        assert opsys.order_unit_norm(opsys.unit(m2)) == pytest.approx(1.0)

    def test_scaling(self, m2):
        assert opsys.order_unit_norm(3.0 * opsys.unit(m2)) == pytest.approx(3.0)

    def test_matrix_norm_on_selfadjoint_agrees(self, m2, rng):
        x = sampling.random_selfadjoint_element(m2, 2, rng)
        assert opsys.matrix_norm(x) == pytest.approx(opsys.order_unit_norm(x), abs=1e-10)

    def test_nilpotent_coefficient_on_unit(self, m2):
        coeffs = np.zeros((4, 2, 2), dtype=complex)
        e12 = np.zeros((2, 2))
        e12[0, 1] = 1.0
        coeffs = np.einsum("r,ij->rij", m2.unit_coords, e12)
        x = opsys.element(m2, coeffs)
        assert opsys.matrix_norm(x) == pytest.approx(1.0, abs=1e-10)

    def test_zero(self, m2):
        assert opsys.matrix_norm(opsys.element(m2, np.zeros((4, 2, 2)))) == 0.0

    def test_sdp_crosscheck(self, m2, rng):
        x = sampling.random_selfadjoint_element(m2, 1, rng)
        assert opsys.order_unit_norm_sdp(x) == pytest.approx(opsys.order_unit_norm(x), abs=1e-6)

    def test_equals_ambient_spectral(self, rng):
        s = sampling.random_system(3, 4, rng)
        for _ in range(5):
            x = sampling.random_selfadjoint_element(s, 2, rng)
            assert opsys.order_unit_norm(x) == pytest.approx(
                matcore.spectral_norm(opsys.ambient(x)), abs=1e-8
            )


class TestRuanSamples:
    def test_compression_inequality(self, m2, rng):
        for _ in range(8):
            x = sampling.random_element(m2, 2, rng)
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            lhs_coeffs = np.einsum("pi,rpq,qj->rij", a.conj(), x.coeffs, b)
            lhs = opsys.matrix_norm(opsys.element(m2, lhs_coeffs))
            bound = (
                matcore.spectral_norm(a) * opsys.matrix_norm(x) * matcore.spectral_norm(b)
            )
            assert lhs <= bound + 1e-8

    def test_direct_sum_max(self, m2, rng):
        for _ in range(8):
            x = sampling.random_element(m2, 1, rng)
            y = sampling.random_element(m2, 2, rng)
            lhs = opsys.matrix_norm(opsys.direct_sum(x, y))
            assert lhs == pytest.approx(max(opsys.matrix_norm(x), opsys.matrix_norm(y)), abs=1e-8)

    def test_adjoint_isometric(self, m2, rng):
        x = sampling.random_element(m2, 2, rng)
        assert opsys.matrix_norm(opsys.adjoint(x)) == pytest.approx(
            opsys.matrix_norm(x), abs=1e-10
        )


class TestStates:
    def test_normalized_trace(self, m2):
        vals = np.array([np.trace(b) / 2 for b in m2.basis])
        assert opsys.is_state(m2, vals)

    def test_vector_state(self, m2, rng):
        xi = rng.normal(size=2) + 1j * rng.normal(size=2)
        xi = xi / np.linalg.norm(xi)
        vals = np.array([np.vdot(xi, b @ xi) for b in m2.basis])
        assert opsys.is_state(m2, vals)

    def test_not_unital(self, m2):
        vals = np.array([np.trace(b) for b in m2.basis])  # f(1) = 2
        assert not opsys.is_state(m2, vals)

    def test_nonpositive(self, m2):
        rho = np.diag([1.5, -0.5])
        vals = np.array([np.trace(rho @ b) for b in m2.basis])
        assert not opsys.is_state(m2, vals)


class TestJson:
    def test_system_roundtrip(self, rng):
        s = sampling.random_system(3, 5, rng)
        s2 = opsys.system_from_json(opsys.system_to_json(s))
        assert s2.d == s.d and s2.dim == s.dim
        for b in s.basis:
            assert s2.in_span(b)

    def test_element_roundtrip(self, m2, rng):
        x = sampling.random_element(m2, 2, rng)
        y = opsys.element_from_json(m2, opsys.element_to_json(x))
        np.testing.assert_allclose(y.coeffs, x.coeffs, atol=1e-12)

    def test_real_system_roundtrip(self, diag3):
        s2 = opsys.system_from_json(opsys.system_to_json(diag3))
        assert s2.field == "R" and s2.dim == 3
