import numpy as np
import pytest

from ncbase import cones, conic, matcore, opsys, sampling

from conftest import random_hermitian


class TestDualElement:
    def test_adjoint_involution(self, m2, rng):
        phi = sampling.random_dual(m2, 2, rng)
        back = cones.dual_adjoint(cones.dual_adjoint(phi))
        np.testing.assert_allclose(back.values, phi.values, atol=1e-10)

    def test_symmetrize(self, m2, rng):
        phi = cones.dual_symmetrize(sampling.random_dual(m2, 2, rng))
        assert cones.dual_is_selfadjoint(phi)

    def test_apply_matches_values(self, m2):
        phi = sampling.random_dual(m2, 1, sampling.rng_from_seed(1))
        for r, b in enumerate(m2.basis):
            np.testing.assert_allclose(phi.apply(b), phi.values[r], atol=1e-10)

    def test_json_roundtrip(self, m2, rng):
        phi = sampling.random_dual(m2, 2, rng)
        back = cones.dual_from_json(m2, cones.dual_to_json(phi))
        np.testing.assert_allclose(back.values, phi.values, atol=1e-12)


class TestDualCpMembership:
    def test_density_agreement_200(self, m2):
        # level-1 dual cone over the full algebra is exactly {rho >= 0}
        rng = sampling.rng_from_seed(5)
        provider = cones.DualCP(m2)
        for _ in range(200):
            rho = random_hermitian(rng, 2)
            phi = sampling.dual_from_density(m2, rho)
            member, cert = cones.is_member(provider, phi, 1e-7)
            lmin = float(np.linalg.eigvalsh(rho)[0])
            assert member == (lmin >= -1e-7)
            assert cert.margin == pytest.approx(lmin, abs=1e-7)

    def test_state_is_member(self, m2, rng):
        phi = sampling.random_state(m2, rng)
        member, cert = cones.is_member(cones.DualCP(m2), phi, 1e-7)
        assert member and matcore.is_psd(cert.matrix, 1e-6)

    def test_negated_state(self, m2, rng):
        phi = sampling.random_state(m2, rng)
        member, _ = cones.is_member(cones.DualCP(m2), -phi, 1e-7)
        assert not member

    def test_compression_witness(self, rng):
        # a -> V* a V restricted to a proper subsystem
        s = sampling.random_system(3, 4, rng)
        v = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        vals = np.stack([v.conj().T @ b @ v for b in s.basis])
        phi = cones.DualElement(s, vals)
        member, cert = cones.is_member(cones.DualCP(s), phi, 1e-7)
        assert member
        choi = cert.matrix
        assert matcore.is_psd(choi, 1e-6)
        # certificate restricts back to phi
        back = cones.DualElement(s, cones._restrict_choi(s, choi, 2))
        np.testing.assert_allclose(back.values, phi.values, atol=1e-5)

    def test_zero_map_member(self, m2):
        phi = cones.DualElement(m2, np.zeros((4, 1, 1)))
        member, _ = cones.is_member(cones.DualCP(m2), phi, 1e-7)
        assert member

    def test_level_cap(self, m2, rng):
        provider = cones.DualCP(m2, max_level=2)
        phi = sampling.random_selfadjoint_dual(m2, 3, rng)
        with pytest.raises(cones.ConesError):
            cones.is_member(provider, phi, 1e-7)

    def test_k_positivity_crossvalidation(self, rng):
        # membership iff sampled amplifications preserve positivity (k <= d)
        s = sampling.random_system(2, 3, rng)
        provider = cones.DualCP(s)
        for trial in range(6):
            phi = sampling.random_selfadjoint_dual(s, 1, rng)
            member, _ = cones.is_member(provider, phi, 1e-7)
            violated = False
            for k in (1, 2):
                for _ in range(40):
                    x = sampling.random_cone_element(s, k, rng)
                    if not matcore.is_psd(matcore.herm(cones.amplified_apply(phi, x)), 1e-8):
                        violated = True
            if member:
                assert not violated
            # non-members may need a sharper witness than sampling finds, so
            # only the member direction is asserted here; the converse is the
            # bipolar check's job


class TestInheritedMembership:
    def test_unit(self, m2):
        member, margin = cones.is_member(cones.Inherited(m2), opsys.unit(m2, 2), 1e-7)
        assert member and margin == pytest.approx(1.0, abs=1e-12)

    def test_margin_sdp_agrees_with_eigen(self, rng):
        s = sampling.random_system(2, 3, rng)
        provider = cones.Inherited(s)
        for _ in range(5):
            x = sampling.random_selfadjoint_element(s, 2, rng)
            lmin = matcore.min_eig(matcore.herm(opsys.ambient(x)))
            sdp = cones.inherited_margin_sdp(provider, x, 1e-7)
            assert sdp == pytest.approx(lmin, abs=1e-6)

    def test_membership_stable_under_isometry(self, m2, rng):
        x = sampling.random_cone_element(m2, 3, rng)
        alpha = sampling.random_isometry(3, 2, rng)
        y = opsys.compress(x, alpha)
        member, _ = cones.is_member(cones.Inherited(m2), y, 1e-7)
        assert member

    def test_direct_sums_stay_members(self, m2, rng):
        x = sampling.random_cone_element(m2, 1, rng)
        y = sampling.random_cone_element(m2, 2, rng)
        member, _ = cones.is_member(cones.Inherited(m2), opsys.direct_sum(x, y), 1e-7)
        assert member

    def test_dual_compression_isometry(self, m2, rng):
        phi = sampling.random_cp_dual(m2, 3, rng)
        alpha = sampling.random_isometry(3, 2, rng)
        member, _ = cones.is_member(cones.DualCP(m2), cones.dual_compress(phi, alpha), 1e-7)
        assert member

    def test_dual_direct_sum(self, m2, rng):
        a = sampling.random_cp_dual(m2, 1, rng)
        b = sampling.random_cp_dual(m2, 2, rng)
        member, _ = cones.is_member(cones.DualCP(m2), cones.dual_direct_sum(a, b), 1e-7)
        assert member


class TestBaseSpec:
    def test_state_in_base(self, m2, rng):
        bs = cones.BaseSpec(cones.DualCP(m2))
        phi = sampling.random_state(m2, rng)
        assert cones.in_base(bs, phi, 1e-7)

    def test_scaled_state_not_in_base(self, m2, rng):
        bs = cones.BaseSpec(cones.DualCP(m2))
        phi = sampling.random_state(m2, rng)
        assert not cones.in_base(bs, 2.0 * phi, 1e-7)

    def test_direct_sum_of_base_points(self, m2, rng):
        bs = cones.BaseSpec(cones.DualCP(m2))
        k1 = sampling.random_base_element(bs, 1, rng)
        k2 = sampling.random_base_element(bs, 1, rng)
        assert cones.in_base(bs, cones.dual_direct_sum(k1, k2), 1e-7)

    def test_inherited_f1_validation(self, m2):
        with pytest.raises(cones.ConesError):
            cones.BaseSpec(cones.Inherited(m2), np.array([1.0, 0.0, 0.0, 0.0]))  # f1(1) != 1

    def test_faithful_state_certificate(self, m2, rng):
        vals = sampling.random_faithful_state_values(m2, rng)
        bs = cones.BaseSpec(cones.Inherited(m2), vals)
        assert bs.strict_positivity_certificate() > 1e-7

    def test_vector_state_not_faithful(self, m2):
        xi = np.array([1.0, 0.0])
        vals = np.array([np.vdot(xi, b @ xi) for b in m2.basis])
        bs = cones.BaseSpec(cones.Inherited(m2), vals)
        assert bs.strict_positivity_certificate() <= 1e-7

    def test_dualcp_certificate_is_one(self, m2):
        bs = cones.BaseSpec(cones.DualCP(m2))
        assert bs.strict_positivity_certificate() == pytest.approx(1.0, abs=1e-6)

    def test_reference_base_point(self, m2):
        bs = cones.BaseSpec(cones.DualCP(m2))
        assert cones.in_base(bs, bs.reference_base_point(2), 1e-7)


class TestBipolar:
    def test_report_clean_on_random_samples(self, rng):
        s = sampling.random_system(2, 3, rng)
        samples = [
            sampling.random_selfadjoint_element(s, n, rng) for n in (1, 2) for _ in range(4)
        ]
        rep = cones.bipolar_check(cones.Inherited(s), samples, 1e-7)
        assert rep.ok
        assert rep.max_margin_gap <= 1e-6

    def test_unit_positive_against_states(self, m2, rng):
        u = opsys.unit(m2, 1)
        for _ in range(10):
            psi = sampling.random_cp_dual(m2, 1, rng)
            assert cones.scalar_pairing(psi, u).real >= -1e-9

    def test_separating_witness_scaled(self, m2):
        # min ambient eigenvalue -1 separates with pairing <= -1 + tol
        x = opsys.from_ambient(m2, np.diag([1.0, -1.0]))
        psi = cones.eigenvector_witness(m2, x)
        member, _ = cones.is_member(cones.DualCP(m2), psi, 1e-7)
        assert member
        assert cones.scalar_pairing(psi, x).real <= -1.0 + 1e-7

    def test_zero_in_both_cones(self, m2):
        zero = opsys.element(m2, np.zeros((4, 1, 1)))
        member, _ = cones.is_member(cones.Inherited(m2), zero, 1e-9)
        assert member
        margin = cones._dual_route_margin(m2, zero, 1e-7)
        assert margin == pytest.approx(0.0, abs=1e-7)

    def test_real_field_systems(self, diag3, rng):
        samples = [sampling.random_selfadjoint_element(diag3, n, rng) for n in (1, 2) for _ in range(3)]
        rep = cones.bipolar_check(cones.Inherited(diag3), samples, 1e-7)
        assert rep.ok
