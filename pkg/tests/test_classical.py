import numpy as np
import pytest

from ncbase import classical, cones, matcore, ncnorm, opsys, sampling
from ncbase.classical import ComplexPoint


@pytest.fixture(scope="module")
def simplex4():
    return classical.simplex_space(4)


class TestBaseSpace:
    def test_simplex_f1(self, simplex4):
        np.testing.assert_allclose(simplex4.f1, np.ones(4))

    def test_off_hyperplane_rejected(self):
        with pytest.raises(classical.ClassicalError):
            classical.make_base_space([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])

    def test_rank_deficient_rejected(self):
        with pytest.raises(classical.ClassicalError):
            classical.make_base_space([[1.0, 0.0], [1.0, 0.0]])

    def test_json_roundtrip(self, simplex4):
        back = classical.base_space_from_json(classical.base_space_to_json(simplex4))
        np.testing.assert_allclose(back.base_points, simplex4.base_points)


class TestMinkowskiGauge:
    def test_base_point_has_norm_one(self, simplex4):
        assert classical.minkowski_gauge(simplex4, np.eye(4)[1]) == pytest.approx(1.0, abs=1e-9)

    def test_zero(self, simplex4):
        assert classical.minkowski_gauge(simplex4, np.zeros(4)) == pytest.approx(0.0, abs=1e-10)

    def test_simplex_gauge_is_l1(self, simplex4, rng):
        for _ in range(10):
            u = rng.normal(size=4)
            assert classical.minkowski_gauge(simplex4, u) == pytest.approx(
                np.abs(u).sum(), abs=1e-9
            )

    def test_general_polytope_against_scaling(self, rng):
        pts = rng.normal(size=(6, 3))
        pts = pts / (pts @ np.array([1.0, 0.3, -0.2]))[:, None]  # put on a hyperplane
        sp = classical.make_base_space(pts)
        u = rng.normal(size=3)
        g = classical.minkowski_gauge(sp, u)
        assert classical.minkowski_gauge(sp, 2 * u) == pytest.approx(2 * g, rel=1e-8)


class TestExtendedBaseNorm:
    def test_real_point_equals_gauge(self, simplex4, rng):
        for _ in range(5):
            u = rng.normal(size=4)
            e = classical.extended_base_norm(simplex4, ComplexPoint(u, np.zeros(4)))
            assert e == pytest.approx(classical.minkowski_gauge(simplex4, u), abs=1e-7)

    def test_rotated_base_point(self, simplex4):
        e = classical.extended_base_norm(simplex4, ComplexPoint(np.zeros(4), np.eye(4)[0]))
        assert e == pytest.approx(1.0, abs=1e-8)

    def test_complex_l1(self, simplex4, rng):
        ur, ui = rng.normal(size=4), rng.normal(size=4)
        e = classical.extended_base_norm(simplex4, ComplexPoint(ur, ui))
        assert e == pytest.approx(np.abs(ur + 1j * ui).sum(), rel=1e-7)

    def test_f1_contractive(self, simplex4, rng):
        ur, ui = rng.normal(size=4), rng.normal(size=4)
        e = classical.extended_base_norm(simplex4, ComplexPoint(ur, ui))
        f1u = abs(np.dot(simplex4.f1, ur + 1j * ui))
        assert f1u <= e + 1e-8


class TestTaylorNorm:
    def test_real_reduces_to_oracle(self, simplex4):
        x = np.array([1.0, -2.0, 0.5, 0.0])
        t = classical.taylor_norm(x, np.zeros(4), lambda v: classical.dual_gauge(simplex4, v))
        assert t == pytest.approx(classical.dual_gauge(simplex4, x), abs=1e-7)

    def test_scalar_circle(self):
        t = classical.taylor_norm(np.array([3.0]), np.array([4.0]), lambda v: abs(v[0]))
        assert t == pytest.approx(5.0, abs=1e-7)

    def test_equal_parts_inner_product_norm(self, rng):
        x = rng.normal(size=3)
        t = classical.taylor_norm(x, x, np.linalg.norm)
        assert t == pytest.approx(np.sqrt(2) * np.linalg.norm(x), abs=1e-6)


class TestAbsConvHull:
    def test_mixed_unimodular_combination(self, simplex4):
        u = ComplexPoint(np.eye(4)[0] / 2, np.eye(4)[1] / 2)
        assert classical.abs_conv_hull_membership(simplex4, u)

    def test_doubled_point_outside(self, simplex4):
        assert not classical.abs_conv_hull_membership(
            simplex4, ComplexPoint(2 * np.eye(4)[0], np.zeros(4))
        )

    def test_boundary_point(self, simplex4):
        # coefficients with moduli summing to exactly 1
        u = ComplexPoint(
            0.5 * np.eye(4)[0] + 0.3 * np.eye(4)[1], 0.2 * np.eye(4)[2]
        )
        assert classical.abs_conv_hull_membership(simplex4, u, tol=1e-7)


class TestTaylorDuality:
    def test_simplex_report(self):
        sp = classical.simplex_space(3)
        rep = classical.taylor_duality_check(sp, pairs=60, seed=0)
        assert rep.ok, [r for r in rep.records if not r.ok][:3]
        assert rep.max_recovery_defect <= 0.02


class TestClosure:
    def test_simplex_identical(self):
        rep = classical.cone_closure_idempotence(classical.simplex_space(3))
        assert rep.hull_equal and rep.vertices_matched

    def test_redundant_interior_point(self):
        pts = np.vstack([np.eye(3), [[1 / 3, 1 / 3, 1 / 3]]])
        rep = classical.cone_closure_idempotence(classical.make_base_space(pts))
        assert rep.hull_equal and rep.vertices_original == 3

    def test_rotated_simplex(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        pts = np.eye(3) @ q.T
        sp = classical.make_base_space(pts)
        rep = classical.cone_closure_idempotence(sp)
        assert rep.hull_equal and rep.vertices_matched


class TestComplexify:
    def test_diagonal_system(self):
        rep = classical.complexify_check(sampling.diag_system(2, "R"), samples=8, seed=0)
        assert rep.ok, [r for r in rep.records if not r.ok][:3]

    def test_random_real_system(self):
        s = sampling.random_system(3, 3, sampling.rng_from_seed(9), field="R")
        rep = classical.complexify_check(s, samples=8, seed=1)
        assert rep.ok, [r for r in rep.records if not r.ok][:3]

    def test_unimodular_unit(self):
        # x = 0, y = 1: |i*1| = 1 on both sides
        s = sampling.diag_system(2, "R")
        one = opsys.unit(s, 1)
        zero = 0.0 * one
        sc = opsys.make_opsys(list(s.basis), field="C")
        zc = opsys.from_ambient(sc, 1j * opsys.ambient(one))
        assert opsys.matrix_norm(zc) == pytest.approx(1.0, abs=1e-10)
        assert opsys.matrix_norm(classical.c_pair(zero, one)) == pytest.approx(1.0, abs=1e-10)

    def test_complex_input_rejected(self, m2):
        with pytest.raises(classical.ClassicalError):
            classical.complexify_check(m2)


class TestLevelOneAgreement:
    def test_linf_base_norm_matches_gauge_exactly(self):
        # the level-1 dual base of l^inf_n is the simplex: polytope is exact
        system = sampling.diag_system(3, "R")
        bs = cones.BaseSpec(cones.DualCP(system))
        sp = classical.simplex_space(3)
        rng = sampling.rng_from_seed(12)
        deltas = [np.diag([1.0 if i == j else 0.0 for i in range(3)]) for j in range(3)]
        for _ in range(5):
            phi = sampling.random_selfadjoint_dual(system, 1, rng)
            coeffs = np.array([complex(phi.apply(d)[0, 0]).real for d in deltas])
            v1 = ncnorm.nc_base_norm_sa(bs, phi).value
            v2 = classical.minkowski_gauge(sp, coeffs)
            assert v1 == pytest.approx(v2, rel=1e-6, abs=1e-8)

    def test_m2_base_norm_within_one_percent_of_bloch_polytope(self):
        # inscribed Fibonacci net of pure states: gauge within 1% of trace norm
        system = sampling.full_matrix_system(2, "C")
        bs = cones.BaseSpec(cones.DualCP(system))
        npts = 2000
        golden = (1 + np.sqrt(5)) / 2
        idx = np.arange(npts)
        z = 1 - 2 * (idx + 0.5) / npts
        r = np.sqrt(1 - z * z)
        th = 2 * np.pi * idx / golden
        bloch = np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
        paulis = [
            np.array([[0, 1], [1, 0]], dtype=complex),
            np.array([[0, -1j], [1j, 0]]),
            np.array([[1, 0], [0, -1]], dtype=complex),
        ]
        # in (trace, bloch) coordinates rho = (t I + v . sigma)/2; pure states
        # are the points (1, v) with |v| = 1 and the trace norm is max(|t|, |v|)
        pts = np.hstack([np.ones((npts, 1)), bloch])
        sp = classical.make_base_space(pts)
        rng = sampling.rng_from_seed(13)
        for _ in range(4):
            coeffs = rng.normal(size=4)
            rho = coeffs[0] * np.eye(2) / 2 + sum(c * p / 2 for c, p in zip(coeffs[1:], paulis))
            phi = sampling.dual_from_density(system, rho)
            v_sdp = ncnorm.nc_base_norm_sa(bs, phi).value
            v_gauge = classical.minkowski_gauge(sp, coeffs)
            assert v_gauge >= v_sdp - 1e-7
            assert abs(v_sdp - v_gauge) <= 0.01 * max(v_sdp, 1e-12)
