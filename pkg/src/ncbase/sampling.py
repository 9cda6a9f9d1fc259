"""Seeded generators for systems, elements, functionals and CP maps."""

from __future__ import annotations

import numpy as np

from . import cones, matcore, opsys
from .cones import BaseSpec, DualCP, DualElement, Inherited
from .opsys import ConcreteOperatorSystem, SysElement


def rng_from_seed(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _gauss(rng, shape, field: str) -> np.ndarray:
    a = rng.normal(size=shape)
    if field == "C":
        a = a + 1j * rng.normal(size=shape)
    return a


def diag_system(n: int, field: str = "R") -> ConcreteOperatorSystem:
    """The diagonal subsystem of M_n (the function system l^inf_n)."""
    mats = [np.diag([1.0 if i == j else 0.0 for i in range(n)]) for j in range(n)]
    return opsys.make_opsys(mats, field=field)


def full_matrix_system(d: int, field: str = "C") -> ConcreteOperatorSystem:
    mats = []
    for i in range(d):
        for j in range(d):
            m = np.zeros((d, d))
            m[i, j] = 1.0
            mats.append(m)
    return opsys.make_opsys(mats, field=field)


def random_system(
    d: int, dim: int, rng: np.random.Generator, field: str = "C"
) -> ConcreteOperatorSystem:
    """Random unital selfadjoint S in M_d of the requested dimension.

    Draws selfadjoint Gaussian generators, adjoins the identity and lets the
    constructor orthonormalize; the resulting dimension is exactly ``dim``
    almost surely (Gaussian generators are in general position).
    """
    if not 1 <= dim <= d * d:
        raise ValueError("dim must lie in [1, d^2]")
    gens = [np.eye(d)]
    while len(gens) < dim:
        gens.append(matcore.herm(_gauss(rng, (d, d), field)))
    sys_ = opsys.make_opsys(gens, field=field)
    if sys_.dim != dim:
        raise RuntimeError("degenerate draw: system dimension collapsed")
    return sys_


def random_element(system: ConcreteOperatorSystem, n: int, rng) -> SysElement:
    return opsys.element(system, _gauss(rng, (system.dim, n, n), system.field))


def random_selfadjoint_element(system: ConcreteOperatorSystem, n: int, rng) -> SysElement:
    x = random_element(system, n, rng)
    return opsys.from_ambient(system, matcore.herm(opsys.ambient(x)))


def random_cone_element(system: ConcreteOperatorSystem, n: int, rng) -> SysElement:
    """A member of M_n(S)+: a selfadjoint element shifted by its norm."""
    x = random_selfadjoint_element(system, n, rng)
    return x + opsys.matrix_norm(x) * opsys.unit(system, n)


def random_dual(system: ConcreteOperatorSystem, n: int, rng) -> DualElement:
    vals = _gauss(rng, (system.dim, n, n), system.field)
    return DualElement(system, vals.astype(complex))


def random_selfadjoint_dual(system: ConcreteOperatorSystem, n: int, rng) -> DualElement:
    return cones.dual_symmetrize(random_dual(system, n, rng))


def random_cp_dual(
    system: ConcreteOperatorSystem, n: int, rng, rank: int | None = None
) -> DualElement:
    """Restriction to S of a random CP map M_d -> M_n (Choi = A A*)."""
    d = system.d
    rank = rank or d * n
    a = _gauss(rng, (d * n, rank), system.field) / np.sqrt(d * n)
    choi = a @ a.conj().T
    return DualElement(system, cones._restrict_choi(system, choi, n))


def dual_from_density(system: ConcreteOperatorSystem, rho: np.ndarray) -> DualElement:
    """Level-1 functional a -> tr(rho a)."""
    vals = np.array([np.trace(rho @ b) for b in system.basis]).reshape(-1, 1, 1)
    return DualElement(system, vals)


def density_of_dual(phi: DualElement) -> np.ndarray:
    """HS representer of a selfadjoint level-1 functional within the span."""
    if phi.level != 1:
        raise ValueError("density representation is a level-1 notion")
    rho = sum(v.conjugate() * b for v, b in zip(phi.values[:, 0, 0], phi.system.basis))
    return matcore.herm(rho)


def random_state(system: ConcreteOperatorSystem, rng) -> DualElement:
    phi = random_cp_dual(system, 1, rng)
    g = float(np.real(phi.values[:, 0, 0] @ system.unit_coords))
    return phi * (1.0 / g)


def random_faithful_state_values(system: ConcreteOperatorSystem, rng) -> np.ndarray:
    """Values on the basis of the state a -> tr(rho a) with rho > 0."""
    d = system.d
    a = _gauss(rng, (d, d), system.field)
    rho = a @ a.conj().T + 0.2 * np.eye(d)
    rho = rho / np.trace(rho).real
    return np.array([np.trace(rho @ b) for b in system.basis])


def random_base_element(bs: BaseSpec, n: int, rng):
    """A random element of K_n, built from a cone element pushed to the base."""
    if isinstance(bs.provider, Inherited):
        x = random_cone_element(bs.system, n, rng)
        x = x + 0.2 * opsys.matrix_norm(x) * opsys.unit(bs.system, n)
        compress = opsys.compress
    else:
        x = random_cp_dual(bs.system, n, rng)
        x = x + 0.2 * float(np.abs(x.values).max()) * bs.reference_base_point(n)
        compress = cones.dual_compress
    g = matcore.herm(bs.f1_apply(x))
    w, v = matcore.herm_eig(g)
    if w[0] <= 1e-10:
        raise RuntimeError("degenerate draw: f1 mass not positive definite")
    ginvsqrt = (v / np.sqrt(w)) @ v.conj().T
    return compress(x, ginvsqrt)


def random_isometry(n: int, m: int, rng, field: str = "C") -> np.ndarray:
    """alpha in M_{n, m} with alpha* alpha = I_m (requires n >= m)."""
    q, _ = np.linalg.qr(_gauss(rng, (n, m), field))
    return q[:, :m]
