import numpy as np
import pytest

from ncbase import conic

from conftest import random_hermitian


def max_eig_problem(diag):
    """min t s.t. t I - diag(...) PSD, via a pinned slack block."""
    p = conic.ConicProblem()
    t = p.new_free(1)
    k = len(diag)
    w = p.new_psd(k)
    d = np.diag(diag)
    for i in range(k):
        for j in range(i, k):
            e = conic.expr_entry(p, w, i, j) - conic.expr_entry(p, t, 0) * (1.0 if i == j else 0.0)
            p.add_eq_expr(e, -d[i, j])
    p.set_objective(conic.expr_entry(p, t, 0))
    return p


class TestSolve:
    def test_max_eigenvalue(self):
        sol = conic.solve(max_eig_problem([1.0, 3.0]), 1e-8)
        assert sol.optimal
        assert sol.objective == pytest.approx(3.0, abs=1e-7)

    def test_zero_operand(self):
        sol = conic.solve(max_eig_problem([0.0, 0.0]), 1e-8)
        assert sol.objective == pytest.approx(0.0, abs=1e-7)

    def test_simplex(self):
        p = conic.ConicProblem()
        x = p.new_nonneg(4)
        p.add_eq({x: np.ones(4)}, 1.0)
        p.set_objective(conic.LinExpr({x: np.ones(4)}))
        sol = conic.solve(p, 1e-8)
        assert sol.objective == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(sol.primal[x].sum(), 1.0, atol=1e-7)

    def test_weak_duality_and_gap(self, rng):
        for _ in range(5):
            diag = rng.uniform(-2, 2, size=3)
            sol = conic.solve(max_eig_problem(list(diag)), 1e-8)
            assert sol.optimal
            assert sol.gap <= 1e-8
            assert sol.objective == pytest.approx(max(diag), abs=1e-6)

    def test_determinism(self):
        a = conic.solve(max_eig_problem([0.3, 1.7, -0.4]), 1e-8)
        b = conic.solve(max_eig_problem([0.3, 1.7, -0.4]), 1e-8)
        assert abs(a.objective - b.objective) <= 2e-8

    def test_primal_infeasible_detected(self):
        p = conic.ConicProblem()
        x = p.new_nonneg(2)
        p.add_eq({x: np.ones(2)}, -1.0)  # sum of nonnegatives = -1
        p.set_objective(conic.LinExpr({x: np.ones(2)}))
        sol = conic.solve(p, 1e-8)
        assert sol.status == conic.PRIMAL_INFEASIBLE

    def test_redundant_equalities_are_dropped(self):
        p = max_eig_problem([1.0, 2.0])
        # duplicate an equality row verbatim
        coeffs, rhs = p.equalities[0]
        p.add_eq({k: v.copy() for k, v in coeffs.items()}, rhs)
        sol = conic.solve(p, 1e-8)
        assert sol.optimal and sol.objective == pytest.approx(2.0, abs=1e-7)

    def test_unpinned_free_variable_rejected(self):
        p = conic.ConicProblem()
        p.new_free(1)
        p.new_psd(1)
        p.set_objective(conic.LinExpr())
        with pytest.raises(conic.ConicError):
            conic.solve(p, 1e-8)

    def test_tolerance_window(self):
        with pytest.raises(conic.ConicError):
            conic.solve(max_eig_problem([1.0]), 1e-2)


class TestComplexEmbed:
    def test_pauli_y_like(self):
        h = np.array([[0, 1j], [-1j, 0]])
        e = conic.complex_embed(h)
        np.testing.assert_allclose(np.linalg.eigvalsh(e), [-1, -1, 1, 1], atol=1e-12)

    def test_real_input_block_diagonal(self):
        h = np.array([[1.0, 2.0], [2.0, -1.0]])
        e = conic.complex_embed(h)
        np.testing.assert_allclose(e[:2, :2], h)
        np.testing.assert_allclose(e[2:, 2:], h)
        np.testing.assert_allclose(e[:2, 2:], 0.0)

    def test_identity(self):
        np.testing.assert_allclose(conic.complex_embed(np.eye(2)), np.eye(4))

    def test_min_eig_preserved_and_trace_doubles(self, rng):
        for _ in range(8):
            h = random_hermitian(rng, 4)
            e = conic.complex_embed(h)
            assert np.linalg.eigvalsh(e)[0] == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-12)
            assert np.trace(e) == pytest.approx(2 * np.trace(h).real, abs=1e-12)

    def test_rejects_nonhermitian(self):
        with pytest.raises(conic.ConicError):
            conic.complex_embed(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestHermVar:
    @pytest.mark.parametrize("field", ["R", "C"])
    def test_psd_dominance_roundtrip(self, field, rng):
        h = random_hermitian(rng, 3, field)
        p = conic.ConicProblem()
        t = p.new_free(1)
        v = conic.HermVar(p, 3, field)  # slack t I - h
        for i in range(3):
            for j in range(i, 3):
                ti = conic.expr_entry(p, t, 0) * (1.0 if i == j else 0.0)
                p.add_eq_expr(v.re(i, j) - ti, -h[i, j].real)
                if field == "C" and i != j:
                    p.add_eq_expr(v.im(i, j), -h[i, j].imag)
        p.set_objective(conic.expr_entry(p, t, 0))
        sol = conic.solve(p, 1e-8)
        top = np.linalg.eigvalsh(h)[-1]
        assert sol.objective == pytest.approx(top, abs=1e-6)
        slack = v.extract(sol)
        np.testing.assert_allclose(slack, sol.objective * np.eye(3) - h, atol=1e-5)

    def test_inner_expr_consistency(self, rng):
        # <a, x>' built from inner_re must equal entrywise assembly
        a = random_hermitian(rng, 2, "C")
        p = conic.ConicProblem()
        v = conic.HermVar(p, 2, "C")
        e1 = v.inner_re(a)
        e2 = conic.LinExpr()
        for i in range(2):
            for j in range(2):
                e2 = e2 + v.re(i, j) * a[i, j].real + v.im(i, j) * a[i, j].imag
        np.testing.assert_allclose(e1.coeffs[v.block], e2.coeffs[v.block], atol=1e-12)
