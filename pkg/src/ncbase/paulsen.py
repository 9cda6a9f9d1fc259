"""Paulsen system of an operator space V in M_{d1 x d2}.

The system lives in M_{d1+d2}: scalar multiples of the two identity blocks on
the diagonal, V in the 1-2 corner and V* in the 2-1 corner.  The base
function is the normalized trace tau = (lambda + mu) / 2 of the diagonal
scalars, which is faithful on the cone; the induced nc base norm is
equivalent to the operator system norm within the sandwich [1/2, 4].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cones, matcore, ncnorm, opsys, sampling
from .cones import BaseSpec, Inherited
from .opsys import ConcreteOperatorSystem, SysElement


class PaulsenError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorSpaceRep:
    """Concrete operator space: a basis of d1 x d2 matrices."""

    field: str
    d1: int
    d2: int
    basis: tuple[np.ndarray, ...]

    def __post_init__(self):
        for b in self.basis:
            if np.asarray(b).shape != (self.d1, self.d2):
                raise PaulsenError("basis shapes disagree with the declared shape")
        if self.basis:
            stack = np.vstack([np.asarray(b).reshape(1, -1) for b in self.basis])
            if np.linalg.matrix_rank(stack, tol=1e-10) < len(self.basis):
                raise PaulsenError("operator space basis is linearly dependent")


def operator_space(basis, field: str | None = None) -> OperatorSpaceRep:
    mats = [np.atleast_2d(np.asarray(b)) for b in basis]
    if not mats:
        raise PaulsenError("empty operator space needs an explicit shape; use zero_space")
    d1, d2 = mats[0].shape
    field = field or "C"
    return OperatorSpaceRep(field, d1, d2, tuple(m.astype(complex if field == "C" else float) for m in mats))


def zero_space(d1: int, d2: int, field: str = "C") -> OperatorSpaceRep:
    return OperatorSpaceRep(field, d1, d2, ())


def full_space(d1: int, d2: int, field: str = "C") -> OperatorSpaceRep:
    basis = []
    for i in range(d1):
        for j in range(d2):
            m = np.zeros((d1, d2))
            m[i, j] = 1.0
            basis.append(m)
    return operator_space(basis, field)


def random_space(d1: int, d2: int, dim: int, rng, field: str = "C") -> OperatorSpaceRep:
    mats = [
        rng.normal(size=(d1, d2)) + (1j * rng.normal(size=(d1, d2)) if field == "C" else 0.0)
        for _ in range(dim)
    ]
    return operator_space(mats, field)


@dataclass(frozen=True)
class PaulsenSystem:
    rep: OperatorSpaceRep
    system: ConcreteOperatorSystem
    tau_vals: np.ndarray  # values of tau on the system basis

    @property
    def d1(self) -> int:
        return self.rep.d1

    @property
    def d2(self) -> int:
        return self.rep.d2

    @property
    def big(self) -> int:
        return self.rep.d1 + self.rep.d2

    def base_spec(self, max_level: int = cones.DEFAULT_MAX_LEVEL) -> BaseSpec:
        return BaseSpec(Inherited(self.system, max_level=max_level), self.tau_vals)


def v_project(rep: OperatorSpaceRep, x: np.ndarray) -> np.ndarray:
    """Least-squares projection of a d1 x d2 matrix onto span(V)."""
    if not rep.basis:
        return np.zeros((rep.d1, rep.d2), dtype=complex)
    b = np.vstack([np.asarray(m).reshape(1, -1) for m in rep.basis]).T
    coeff, *_ = np.linalg.lstsq(b, np.asarray(x, dtype=complex).reshape(-1), rcond=None)
    return (b @ coeff).reshape(rep.d1, rep.d2)


def random_corner(rep: OperatorSpaceRep, n: int, rng) -> np.ndarray:
    """Random element of M_n(V) as an (n d1) x (n d2) matrix."""
    out = np.zeros((n * rep.d1, n * rep.d2), dtype=complex)
    for b in rep.basis:
        c = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if rep.field == "C" else 0.0)
        out += np.kron(c, np.asarray(b))
    return out


def corner_embed(rep: OperatorSpaceRep, v: np.ndarray) -> np.ndarray:
    d1, d2 = rep.d1, rep.d2
    out = np.zeros((d1 + d2, d1 + d2), dtype=complex)
    out[:d1, d1:] = v
    return out


def build_paulsen(rep: OperatorSpaceRep) -> PaulsenSystem:
    """The operator system {[[lam I, x], [y*, mu I]] : x, y in V}."""
    d1, d2 = rep.d1, rep.d2
    e1 = np.zeros((d1 + d2, d1 + d2))
    e1[:d1, :d1] = np.eye(d1)
    e2 = np.zeros((d1 + d2, d1 + d2))
    e2[d1:, d1:] = np.eye(d2)
    gens = [e1, e2] + [corner_embed(rep, b) for b in rep.basis]
    system = opsys.make_opsys(gens, field=rep.field)
    t = np.zeros((d1 + d2, d1 + d2))
    t[:d1, :d1] = np.eye(d1) / (2 * d1)
    t[d1:, d1:] = np.eye(d2) / (2 * d2)
    tau_vals = np.array([np.trace(t @ b) for b in system.basis])
    return PaulsenSystem(rep, system, tau_vals)


def paulsen_element(
    ps: PaulsenSystem,
    lam: np.ndarray,
    mu: np.ndarray,
    x: np.ndarray | None = None,
    y: np.ndarray | None = None,
) -> SysElement:
    """[[lam (x) I_d1, x], [y*, mu (x) I_d2]] at level n (y defaults to x).

    lam, mu are n x n scalar blocks; x, y are (n d1) x (n d2) corner matrices
    whose d1 x d2 blocks lie in V.
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=complex))
    mu = np.atleast_2d(np.asarray(mu, dtype=complex))
    n = lam.shape[0]
    if lam.shape != (n, n) or mu.shape != (n, n):
        raise PaulsenError("diagonal data must be square scalar blocks of equal size")
    d1, d2, big = ps.d1, ps.d2, ps.big
    if x is None:
        x = np.zeros((n * d1, n * d2))
    x = np.asarray(x, dtype=complex)
    y = x if y is None else np.asarray(y, dtype=complex)
    if x.shape != (n * d1, n * d2) or y.shape != (n * d1, n * d2):
        raise PaulsenError(f"corners must be {(n * d1, n * d2)}")
    amb = np.zeros((n * big, n * big), dtype=complex)
    for i in range(n):
        for j in range(n):
            blk = np.zeros((big, big), dtype=complex)
            blk[:d1, :d1] = lam[i, j] * np.eye(d1)
            blk[d1:, d1:] = mu[i, j] * np.eye(d2)
            blk[:d1, d1:] = x[i * d1 : (i + 1) * d1, j * d2 : (j + 1) * d2]
            blk[d1:, :d1] = y[j * d1 : (j + 1) * d1, i * d2 : (i + 1) * d2].conj().T
            amb[i * big : (i + 1) * big, j * big : (j + 1) * big] = blk
    if ps.system.field == "R":
        if np.abs(amb.imag).max(initial=0.0) > 1e-12:
            raise PaulsenError("complex data in a real-field Paulsen system")
        amb = amb.real
    return opsys.from_ambient(ps.system, amb)


def split_paulsen(ps: PaulsenSystem, p: SysElement, tol: float = 1e-8):
    """Extract (lam, mu, x, y) from a Paulsen element; rejects non-scalar diagonals."""
    d1, d2, big = ps.d1, ps.d2, ps.big
    amb = opsys.ambient(p)
    n = amb.shape[0] // big
    lam = np.zeros((n, n), dtype=complex)
    mu = np.zeros((n, n), dtype=complex)
    x = np.zeros((n * d1, n * d2), dtype=complex)
    y = np.zeros((n * d1, n * d2), dtype=complex)
    scale = max(1.0, float(np.abs(amb).max(initial=0.0)))
    for i in range(n):
        for j in range(n):
            blk = amb[i * big : (i + 1) * big, j * big : (j + 1) * big]
            lam[i, j] = np.trace(blk[:d1, :d1]) / d1
            mu[i, j] = np.trace(blk[d1:, d1:]) / d2
            if (
                matcore.frob(blk[:d1, :d1] - lam[i, j] * np.eye(d1)) > tol * scale
                or matcore.frob(blk[d1:, d1:] - mu[i, j] * np.eye(d2)) > tol * scale
            ):
                raise PaulsenError("diagonal blocks are not scalar multiples of the identity")
            x[i * d1 : (i + 1) * d1, j * d2 : (j + 1) * d2] = blk[:d1, d1:]
            y[j * d1 : (j + 1) * d1, i * d2 : (i + 1) * d2] = blk[d1:, :d1].conj().T
    return lam, mu, x, y


def corner_norm(ps: PaulsenSystem, x: np.ndarray) -> float:
    """Original operator space norm of a level-n corner: the spectral norm."""
    return matcore.spectral_norm(x)


# ---------------------------------------------------------------------------
# positivity formula (the bilinear-form criterion)
# ---------------------------------------------------------------------------

@dataclass
class PositivityFormulaReport:
    psd: bool
    sampled_violations: int
    witness_violation: float | None  # for non-PSD inputs: the certified violation
    scalar_bound_ok: bool | None     # n = 1: |x| <= sqrt(lam mu) iff PSD
    agree: bool


def positivity_formula_check(
    ps: PaulsenSystem,
    lam: np.ndarray,
    mu: np.ndarray,
    x: np.ndarray,
    pairs: int = 500,
    tol: float = 1e-9,
    seed: int = 0,
) -> PositivityFormulaReport:
    """Ambient PSD test vs the sampled inequality |<x eta, zeta>|^2 <= <lam z,z><mu e,e>."""
    rng = sampling.rng_from_seed(seed)
    p = paulsen_element(ps, lam, mu, x)
    amb = matcore.herm(opsys.ambient(p))
    psd = matcore.is_psd(amb, tol=1e-9)
    n = np.atleast_2d(lam).shape[0]
    d1, d2 = ps.d1, ps.d2
    lam_big = np.kron(np.atleast_2d(lam), np.eye(d1))
    mu_big = np.kron(np.atleast_2d(mu), np.eye(d2))
    scale = max(1.0, float(np.abs(amb).max(initial=0.0)))

    violations = 0
    for _ in range(pairs):
        zeta = rng.normal(size=n * d1) + 1j * rng.normal(size=n * d1)
        eta = rng.normal(size=n * d2) + 1j * rng.normal(size=n * d2)
        lhs = abs(np.vdot(zeta, _corner_of(amb, n, d1, d2) @ eta))
        rhs = np.sqrt(
            max(np.vdot(zeta, lam_big @ zeta).real, 0.0)
            * max(np.vdot(eta, mu_big @ eta).real, 0.0)
        )
        if lhs > rhs + tol * scale:
            violations += 1

    witness_violation = None
    if not psd:
        w, v = matcore.herm_eig(amb)
        vec = v[:, 0]
        zeta, eta = _split_vec(vec, n, d1, d2)
        lhs = abs(np.vdot(zeta, _corner_of(amb, n, d1, d2) @ eta))
        rhs = np.sqrt(
            max(np.vdot(zeta, lam_big @ zeta).real, 0.0)
            * max(np.vdot(eta, mu_big @ eta).real, 0.0)
        )
        witness_violation = lhs - rhs

    scalar_ok = None
    if n == 1:
        l0, m0 = complex(np.atleast_2d(lam)[0, 0]).real, complex(np.atleast_2d(mu)[0, 0]).real
        if l0 >= 0 and m0 >= 0:
            bound = matcore.spectral_norm(x) <= np.sqrt(l0 * m0) + tol * scale
            scalar_ok = bound == psd

    agree = (psd and violations == 0) or (
        not psd and witness_violation is not None and witness_violation > -tol * scale
    )
    if scalar_ok is False:
        agree = False
    return PositivityFormulaReport(psd, violations, witness_violation, scalar_ok, agree)


def _corner_of(amb: np.ndarray, n: int, d1: int, d2: int) -> np.ndarray:
    big = d1 + d2
    x = np.zeros((n * d1, n * d2), dtype=complex)
    for i in range(n):
        for j in range(n):
            blk = amb[i * big : (i + 1) * big, j * big : (j + 1) * big]
            x[i * d1 : (i + 1) * d1, j * d2 : (j + 1) * d2] = blk[:d1, d1:]
    return x


def _split_vec(vec: np.ndarray, n: int, d1: int, d2: int):
    big = d1 + d2
    zeta = np.concatenate([vec[i * big : i * big + d1] for i in range(n)])
    eta = np.concatenate([vec[i * big + d1 : (i + 1) * big] for i in range(n)])
    return zeta, eta


# ---------------------------------------------------------------------------
# positive decomposition (scaled contraction form)
# ---------------------------------------------------------------------------

@dataclass
class PositiveDecomposition:
    lam_sqrt: np.ndarray
    mu_sqrt: np.ndarray
    z: np.ndarray          # contraction corner in M_n(V)
    z_norm: float
    residual: float


def positive_decompose(ps: PaulsenSystem, p: SysElement, tol: float = 1e-8) -> PositiveDecomposition:
    """Write a positive Paulsen element as (l^1/2 + m^1/2) [[I, z], [z*, I]] (same).

    z = (e lam e)^(-1/2) x (f mu f)^(-1/2) through the support projections,
    so rank-deficient diagonals are allowed; z is a contraction of M_n(V).
    """
    amb = opsys.ambient(p)
    if not matcore.is_psd(matcore.herm(amb), tol=1e-8):
        raise PaulsenError("positive_decompose needs a positive element")
    lam, mu, x, _ = split_paulsen(ps, p)
    lam, mu = matcore.herm(lam), matcore.herm(mu)
    n = lam.shape[0]
    d1, d2 = ps.d1, ps.d2
    rl = matcore.restricted_inv_sqrt(lam)
    rm = matcore.restricted_inv_sqrt(mu)
    z = np.kron(rl, np.eye(d1)) @ x @ np.kron(rm, np.eye(d2))
    lh = _psd_sqrt(lam)
    mh = _psd_sqrt(mu)
    rebuilt = paulsen_element(ps, lam, mu, np.kron(lh, np.eye(d1)) @ z @ np.kron(mh, np.eye(d2)))
    resid = matcore.frob(opsys.ambient(rebuilt) - amb) / max(1.0, matcore.frob(amb))
    znorm = matcore.spectral_norm(z)
    ball = paulsen_element(ps, np.eye(n), np.eye(n), z)
    if not matcore.is_psd(matcore.herm(opsys.ambient(ball)), tol=max(tol, 1e-8)):
        raise PaulsenError("decomposition produced a non-contractive corner")
    return PositiveDecomposition(lh, mh, z, znorm, resid)


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = matcore.herm_eig(a)
    return matcore.herm((v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T)


# ---------------------------------------------------------------------------
# K_1 membership formula
# ---------------------------------------------------------------------------

def k1_membership(ps: PaulsenSystem, lam: float, x: np.ndarray, tol: float = 1e-7) -> bool:
    """Closed form: [[lam I, x], [x*, (2-lam) I]] in K_1 iff 0 <= lam <= 2 and
    |x| <= sqrt(lam (2 - lam))."""
    if lam < -tol or lam > 2.0 + tol:
        return False
    bound = np.sqrt(max(lam * (2.0 - lam), 0.0))
    return matcore.spectral_norm(np.asarray(x)) <= bound + tol


def k1_candidate(ps: PaulsenSystem, lam: float, x: np.ndarray) -> SysElement:
    return paulsen_element(ps, np.array([[lam]]), np.array([[2.0 - lam]]), np.asarray(x, dtype=complex))


# ---------------------------------------------------------------------------
# norm-equivalence verification (the [1/2, 4] sandwich)
# ---------------------------------------------------------------------------

@dataclass
class EquivalenceReport:
    records: list[ncnorm.CheckRecord]
    min_ratio: float          # min |u| / |u|_tau observed
    max_ratio: float          # max |u| / |u|_tau observed
    witness_value: float      # best original norm found over K_2
    witness: SysElement | None

    @property
    def ok(self) -> bool:
        return all(r.status == "pass" for r in self.records)


def verify_equivalence(
    ps: PaulsenSystem,
    levels=(1, 2),
    samples: int = 20,
    tol: float = 1e-5,
    seed: int = 0,
    witness_restarts: int = 100,
    witness_target: float = 4.0 - 1e-3,
) -> EquivalenceReport:
    rng = sampling.rng_from_seed(seed)
    bs = ps.base_spec(max_level=2 * max(levels))
    records: list[ncnorm.CheckRecord] = []
    min_ratio, max_ratio = np.inf, 0.0
    for n in levels:
        for s in range(samples):
            u = sampling.random_element(ps.system, n, rng)
            orig = opsys.matrix_norm(u)
            tau_norm = ncnorm.nc_base_norm(bs, u).value
            lo = 0.5 * tau_norm - tol * (1.0 + tau_norm)
            hi = 4.0 * tau_norm + tol * (1.0 + tau_norm)
            ok = lo <= orig <= hi
            if tau_norm > 1e-12:
                min_ratio = min(min_ratio, orig / tau_norm)
                max_ratio = max(max_ratio, orig / tau_norm)
            records.append(
                ncnorm.CheckRecord(
                    f"sandwich n={n} s={s}", "pass" if ok else "fail", orig, hi, tol
                )
            )
        for s in range(max(samples // 2, 3)):
            k = sampling.random_base_element(bs, n, rng)
            orig = opsys.matrix_norm(k)
            ok = orig <= 4.0 + 1e-6
            records.append(
                ncnorm.CheckRecord(
                    f"base bound n={n} s={s}", "pass" if ok else "fail", orig, 4.0, 1e-6
                )
            )
    witness_value, witness = base_norm_extremal_search(
        ps, level=2, restarts=witness_restarts, seed=seed, target=witness_target
    )
    records.append(
        ncnorm.CheckRecord(
            "norm-4 witness at level 2",
            "pass" if witness_value >= witness_target else "fail",
            witness_value,
            witness_target,
            1e-3,
        )
    )
    return EquivalenceReport(records, min_ratio, max_ratio, witness_value, witness)


def base_norm_extremal_search(
    ps: PaulsenSystem,
    level: int = 2,
    restarts: int = 100,
    iters: int = 8,
    seed: int = 0,
    target: float | None = None,
):
    """Maximize the original norm over the base spectrahedron K_level.

    Alternating ascent: for a fixed unit vector w the best base element is an
    SDP with objective <w w*, P>; the next direction is the top eigenvector.
    Deterministic given the seed; returns (best value, witness element).
    """
    from . import conic

    rng = sampling.rng_from_seed(seed)
    bs = ps.base_spec(max_level=level)
    nd = level * ps.big
    best_val, best_el = 0.0, None
    for restart in range(restarts):
        if restart % 3 == 2:
            k0 = sampling.random_base_element(bs, level, rng)
            _, v = matcore.herm_eig(matcore.herm(opsys.ambient(k0)))
            w = v[:, -1]
        else:
            w = rng.normal(size=nd) + (1j * rng.normal(size=nd) if ps.system.field == "C" else 0.0)
            w = w / np.linalg.norm(w)
        for _ in range(iters):
            p_el = _best_base_for_direction(bs, level, w)
            if p_el is None:
                break
            amb = matcore.herm(opsys.ambient(p_el))
            ww, vv = matcore.herm_eig(amb)
            val = float(ww[-1])
            if val > best_val:
                best_val, best_el = val, p_el
            new_w = vv[:, -1]
            if abs(abs(np.vdot(new_w, w)) - 1.0) < 1e-12:
                break
            w = new_w
        if target is not None and best_val >= target:
            break
    return best_val, best_el


def _best_base_for_direction(bs: BaseSpec, n: int, w: np.ndarray):
    from . import conic

    problem = conic.ConicProblem()
    h = cones.encode_membership(bs.provider, problem, n)
    cplx = bs.system.field == "C"
    eye = np.eye(n)
    for i in range(n):
        for j in range(i, n):
            problem.add_eq_expr(h.f1_re(bs, i, j), float(eye[i, j]))
            if cplx and i != j:
                problem.add_eq_expr(h.f1_im(bs, i, j), 0.0)
    problem.set_objective(h.var.inner_re(np.outer(w, w.conj())) * -1.0)
    sol = conic.solve(problem, 1e-8)
    if not sol.optimal:
        return None
    return h.extract(sol)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def rep_to_json(rep: OperatorSpaceRep) -> dict:
    return {
        "field": rep.field,
        "shape": [rep.d1, rep.d2],
        "basis": [matcore.mat_to_json(b, rep.field) for b in rep.basis],
    }


def rep_from_json(obj: dict) -> OperatorSpaceRep:
    d1, d2 = obj["shape"]
    mats = [matcore.mat_from_json(m) for m in obj["basis"]]
    if not mats:
        return zero_space(d1, d2, obj.get("field", "C"))
    rep = operator_space(mats, field=obj.get("field"))
    if (rep.d1, rep.d2) != (d1, d2):
        raise PaulsenError("shape disagrees with basis matrices")
    return rep
