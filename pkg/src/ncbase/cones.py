"""Cone providers: conic-programmable membership in matrix cones.

Two providers share one interface:

* ``Inherited(system)`` — the concrete cones M_n(S)+ = M_n(S) with PSD
  ambient matrix.  Membership is decidable by eigendecomposition; the conic
  encoding (a PSD ambient block pinned to the subspace) exists for
  cross-checks and for norm programs.

* ``DualCP(system)`` — the dual cones M_n(S*)+, i.e. completely positive
  maps S -> M_n.  Membership is encoded through a CP extension to the full
  ambient algebra: a PSD Choi block Y in M_d (x) M_n with the restriction
  constraints  sum_{ab} (b_r)_{ab} Y_{ab} = phi(b_r)  per basis element.
  The extension exists exactly when phi is in the dual cone, which is what
  makes the encoding a membership test and the bipolar identity checkable.

A ``BaseSpec`` pairs a provider with the base function f1 cutting the base
K_n = (cone at level n) intersect {f1^(n) = I_n} out of the cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic, matcore, opsys
from .conic import ConicProblem, HermVar, LinExpr
from .opsys import ConcreteOperatorSystem, SysElement

DEFAULT_MAX_LEVEL = 4


class ConesError(ValueError):
    pass


class Indeterminate(RuntimeError):
    """A membership query whose solver run could not certify either answer."""


# ---------------------------------------------------------------------------
# dual elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualElement:
    """Element of M_n(S*): the linear map S -> M_n with b_r -> values[r]."""

    system: ConcreteOperatorSystem
    values: np.ndarray  # (dim, n, n) complex (real entries for field "R")

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[0] != self.system.dim or v.shape[1] != v.shape[2]:
            raise ConesError(f"bad dual element shape {v.shape}")
        object.__setattr__(self, "values", v.astype(complex))

    @property
    def level(self) -> int:
        return self.values.shape[1]

    def __add__(self, other: "DualElement") -> "DualElement":
        return DualElement(self.system, self.values + other.values)

    def __sub__(self, other: "DualElement") -> "DualElement":
        return DualElement(self.system, self.values - other.values)

    def __mul__(self, s: complex) -> "DualElement":
        return DualElement(self.system, self.values * s)

    __rmul__ = __mul__

    def __neg__(self) -> "DualElement":
        return self * (-1.0)

    def apply(self, a: np.ndarray) -> np.ndarray:
        """phi(a) for an ambient d x d matrix a in the span."""
        return np.einsum("r,rkl->kl", self.system.coords(a), self.values)


def dual_adjoint(phi: DualElement) -> DualElement:
    """phi* defined by phi*(a) = phi(a*)*; an involution."""
    sys_ = phi.system
    # phi(b_r*) = sum_s adjoint_mat[r, s] values[s]
    on_adj = np.einsum("rs,skl->rkl", sys_.adjoint_mat, phi.values)
    return DualElement(sys_, on_adj.conj().transpose(0, 2, 1))


def dual_is_selfadjoint(phi: DualElement, tol: float = 1e-9) -> bool:
    diff = dual_adjoint(phi).values - phi.values
    scale = max(1.0, float(np.abs(phi.values).max(initial=0.0)))
    return bool(np.abs(diff).max(initial=0.0) <= tol * scale)


def dual_symmetrize(phi: DualElement) -> DualElement:
    return (phi + dual_adjoint(phi)) * 0.5


def amplified_apply(phi: DualElement, x: SysElement) -> np.ndarray:
    """phi^(n)(x) in M_{n * m} for x in M_n(S), phi in M_m(S*)."""
    if phi.system is not x.system:
        raise ConesError("pairing across different systems")
    m = phi.level
    n = x.level
    out = np.zeros((n * m, n * m), dtype=complex)
    for cr, vr in zip(x.coeffs, phi.values):
        out += np.kron(cr, vr)
    return out


def scalar_pairing(phi: DualElement, x: SysElement) -> complex:
    """<vec I, phi^(n)(x) vec I>: the canonical scalar pairing at one level."""
    if phi.level != x.level:
        raise ConesError("scalar pairing needs matching levels")
    return complex(np.einsum("rij,rij->", x.coeffs, phi.values))


def dual_tilde(phi: DualElement) -> DualElement:
    """[[0, phi], [phi*, 0]] in M_{2n}(S*)."""
    n = phi.level
    adj = dual_adjoint(phi)
    vals = np.zeros((phi.system.dim, 2 * n, 2 * n), dtype=complex)
    vals[:, :n, n:] = phi.values
    vals[:, n:, :n] = adj.values
    return DualElement(phi.system, vals)


def dual_direct_sum(phi: DualElement, psi: DualElement) -> DualElement:
    if phi.system is not psi.system:
        raise ConesError("elements live over different systems")
    n, m = phi.level, psi.level
    vals = np.zeros((phi.system.dim, n + m, n + m), dtype=complex)
    vals[:, :n, :n] = phi.values
    vals[:, n:, n:] = psi.values
    return DualElement(phi.system, vals)


def dual_compress(phi: DualElement, alpha: np.ndarray) -> DualElement:
    alpha = np.atleast_2d(np.asarray(alpha))
    vals = np.einsum("pi,rpq,qj->rij", alpha.conj(), phi.values, alpha)
    return DualElement(phi.system, vals)


def dual_to_json(phi: DualElement) -> dict:
    field = phi.system.field
    vals = phi.values.real if field == "R" else phi.values
    return {"level": phi.level, "values": [matcore.mat_to_json(v, field) for v in vals]}


def dual_from_json(system: ConcreteOperatorSystem, obj: dict) -> DualElement:
    vals = np.stack([matcore.mat_from_json(m) for m in obj["values"]])
    if vals.shape[1] != int(obj["level"]):
        raise ConesError("level disagrees with value shapes")
    return DualElement(system, vals)


# ---------------------------------------------------------------------------
# providers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Inherited:
    system: ConcreteOperatorSystem
    max_level: int = DEFAULT_MAX_LEVEL


@dataclass(frozen=True)
class DualCP:
    system: ConcreteOperatorSystem
    max_level: int = DEFAULT_MAX_LEVEL


Provider = Inherited | DualCP


def _check_level(provider: Provider, n: int) -> None:
    if not 1 <= n:
        raise ConesError("matrix level must be >= 1")
    if n > provider.max_level:
        raise ConesError(f"level {n} exceeds the configured maximum {provider.max_level}")


class InheritedHandle:
    """Symbolic member of M_n(S)+: a PSD ambient block pinned to M_n(S)."""

    def __init__(self, provider: Inherited, problem: ConicProblem, n: int):
        sys_ = provider.system
        self.system = sys_
        self.n = n
        self.problem = problem
        self.var = HermVar(problem, n * sys_.d, sys_.field)
        d = sys_.d
        for i in range(n):
            for j in range(i, n):
                for g in sys_.perp:
                    mask = np.zeros((n, n))
                    mask[i, j] = 1.0
                    m = np.kron(mask, g)
                    problem.add_eq_expr(self.var.inner_re(m), 0.0)
                    if sys_.field == "C":
                        problem.add_eq_expr(self.var.inner_im(m), 0.0)

    # canonical data coordinates: upper-triangle ambient entries
    def data_indices(self):
        nd = self.n * self.system.d
        return [(p, q) for p in range(nd) for q in range(p, nd)]

    def data_re(self, idx) -> LinExpr:
        p, q = idx
        return self.var.re(p, q)

    def data_im(self, idx) -> LinExpr:
        p, q = idx
        return self.var.im(p, q)

    @staticmethod
    def data_of(x: SysElement, idx, amb_cache: dict) -> complex:
        if "amb" not in amb_cache:
            amb_cache["amb"] = opsys.ambient(x)
        p, q = idx
        return complex(amb_cache["amb"][p, q])

    def f1_re(self, bs: "BaseSpec", i: int, j: int) -> LinExpr:
        return self.var.inner_re(self._f1_block(bs, i, j))

    def f1_im(self, bs: "BaseSpec", i: int, j: int) -> LinExpr:
        return self.var.inner_im(self._f1_block(bs, i, j))

    def _f1_block(self, bs: "BaseSpec", i: int, j: int) -> np.ndarray:
        mask = np.zeros((self.n, self.n))
        mask[i, j] = 1.0
        return np.kron(mask, bs.f1_density(self.system))

    def extract(self, sol: conic.ConicSolution) -> SysElement:
        amb = self.var.extract(sol)
        return opsys.from_ambient(self.system, amb, tol=1e-5)


class DualCPHandle:
    """Symbolic member of M_n(S*)+: a PSD Choi block with restriction exprs."""

    def __init__(self, provider: DualCP, problem: ConicProblem, n: int):
        sys_ = provider.system
        self.system = sys_
        self.n = n
        self.problem = problem
        self.choi = HermVar(problem, sys_.d * n, sys_.field)

    def _restriction_block(self, r: int, k: int, l: int) -> np.ndarray:
        # tr(M* Y) = sum_{ab} (b_r)_{ab} Y[(a n + k), (b n + l)]
        mask = np.zeros((self.n, self.n))
        mask[k, l] = 1.0
        return np.kron(self.system.basis[r].conj(), mask)

    def data_indices(self):
        return [
            (r, k, l)
            for r in range(self.system.dim)
            for k in range(self.n)
            for l in range(self.n)
        ]

    def data_re(self, idx) -> LinExpr:
        return self.choi.inner_re(self._restriction_block(*idx))

    def data_im(self, idx) -> LinExpr:
        return self.choi.inner_im(self._restriction_block(*idx))

    @staticmethod
    def data_of(phi: DualElement, idx, _cache: dict) -> complex:
        r, k, l = idx
        return complex(phi.values[r, k, l])

    def f1_re(self, bs: "BaseSpec", i: int, j: int) -> LinExpr:
        return self.choi.inner_re(self._f1_block(i, j))

    def f1_im(self, bs: "BaseSpec", i: int, j: int) -> LinExpr:
        return self.choi.inner_im(self._f1_block(i, j))

    def _f1_block(self, i: int, j: int) -> np.ndarray:
        # f1(phi) = phi(1) = partial trace of Choi over the ambient factor
        mask = np.zeros((self.n, self.n))
        mask[i, j] = 1.0
        return np.kron(np.eye(self.system.d), mask)

    def extract(self, sol: conic.ConicSolution) -> DualElement:
        y = self.choi.extract(sol)
        return DualElement(self.system, _restrict_choi(self.system, y, self.n))


def _restrict_choi(system: ConcreteOperatorSystem, choi: np.ndarray, n: int) -> np.ndarray:
    d = system.d
    vals = np.zeros((system.dim, n, n), dtype=complex)
    blocks = choi.reshape(d, n, d, n)
    for r, b in enumerate(system.basis):
        vals[r] = np.einsum("ab,akbl->kl", b, blocks)
    return vals


def encode_membership(provider: Provider, problem: ConicProblem, n: int):
    """Add one symbolic cone member at level n to the problem; return its handle."""
    _check_level(provider, n)
    if isinstance(provider, Inherited):
        return InheritedHandle(provider, problem, n)
    return DualCPHandle(provider, problem, n)


def pin_to(handle, element, offset: complex = 0.0) -> None:
    """Equate the symbolic member to a numeric element (plus a scalar shift)."""
    cache: dict = {}
    cplx = handle.system.field == "C"
    for idx in handle.data_indices():
        v = handle.data_of(element, idx, cache) + offset
        handle.problem.add_eq_expr(handle.data_re(idx), float(v.real))
        if cplx:
            handle.problem.add_eq_expr(handle.data_im(idx), float(v.imag))


def pin_difference(h_pos, h_neg, element) -> None:
    """Constrain  h_pos - h_neg = element."""
    cache: dict = {}
    cplx = h_pos.system.field == "C"
    for idx in h_pos.data_indices():
        v = h_pos.data_of(element, idx, cache)
        h_pos.problem.add_eq_expr(h_pos.data_re(idx) - h_neg.data_re(idx), float(v.real))
        if cplx:
            h_pos.problem.add_eq_expr(h_pos.data_im(idx) - h_neg.data_im(idx), float(v.imag))


# ---------------------------------------------------------------------------
# membership queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChoiCertificate:
    """PSD block in M_d (x) M_n witnessing a CP extension; margin = lambda_min."""

    matrix: np.ndarray
    margin: float


def is_member(provider: Provider, x, tol: float = 1e-7):
    """Cone membership with certificate.

    Inherited: exact eigendecomposition of the ambient matrix (certificate is
    the margin itself).  DualCP: maximize t with Choi >= t I subject to the
    restriction constraints; membership iff the margin t* >= -tol (scaled).
    Solver failure raises :class:`Indeterminate`.
    """
    if isinstance(provider, Inherited):
        if not isinstance(x, SysElement):
            raise ConesError("Inherited membership asks for a SysElement")
        _check_level(provider, x.level)
        amb = opsys.ambient(x)
        if not matcore.is_hermitian(amb, tol=1e-10):
            raise ConesError("membership asked of a non-selfadjoint element")
        margin = matcore.min_eig(amb)
        scale = max(1.0, matcore.spectral_norm(amb))
        return margin >= -tol * scale, margin

    if not isinstance(x, DualElement):
        raise ConesError("DualCP membership asks for a DualElement")
    _check_level(provider, x.level)
    if not dual_is_selfadjoint(x, tol=1e-8):
        raise ConesError("membership asked of a non-selfadjoint dual element")
    sys_ = provider.system
    n, d = x.level, sys_.d

    problem = ConicProblem()
    t = problem.new_free(1)
    h = DualCPHandle(provider, problem, n)
    # Choi = P + t I; restriction(t I): b_r -> t tr(b_r) I_n
    cplx = sys_.field == "C"
    for r in range(sys_.dim):
        trb = complex(np.trace(sys_.basis[r]))
        for k in range(n):
            for l in range(n):
                shift_re = conic.expr_entry(problem, t, 0) * (trb.real if k == l else 0.0)
                problem.add_eq_expr(
                    h.data_re((r, k, l)) + shift_re, float(x.values[r, k, l].real)
                )
                if cplx:
                    shift_im = conic.expr_entry(problem, t, 0) * (trb.imag if k == l else 0.0)
                    problem.add_eq_expr(
                        h.data_im((r, k, l)) + shift_im, float(x.values[r, k, l].imag)
                    )
    problem.set_objective(conic.expr_entry(problem, t, 0) * -1.0)
    sol = conic.solve(problem, max(tol * 1e-2, 1e-9))
    if not sol.optimal:
        raise Indeterminate(f"membership solve ended with status {sol.status}")
    margin = -sol.objective
    scale = max(1.0, float(np.abs(x.values).max(initial=0.0)))
    choi = h.choi.extract(sol) + margin * np.eye(d * n)
    return margin >= -tol * scale, ChoiCertificate(choi, margin)


def inherited_margin_sdp(provider: Inherited, x: SysElement, tol: float = 1e-7) -> float:
    """Conic-route margin for the inherited cone: max t with x - t 1 in M_n(S)+.

    Must agree with the smallest ambient eigenvalue; exists so that
    closed-form membership tests can be cross-checked against the solver.
    """
    if not isinstance(provider, Inherited):
        raise ConesError("inherited_margin_sdp needs an Inherited provider")
    _check_level(provider, x.level)
    sys_ = provider.system
    amb = opsys.ambient(x)
    if not matcore.is_hermitian(amb, tol=1e-10):
        raise ConesError("margin asked of a non-selfadjoint element")
    problem = ConicProblem()
    t = problem.new_free(1)
    h = InheritedHandle(provider, problem, x.level)
    cplx = sys_.field == "C"
    for p, q in h.data_indices():
        shift = conic.expr_entry(problem, t, 0) * (1.0 if p == q else 0.0)
        problem.add_eq_expr(h.data_re((p, q)) + shift, float(amb[p, q].real))
        if cplx and p != q:
            problem.add_eq_expr(h.data_im((p, q)), float(amb[p, q].imag))
    problem.set_objective(conic.expr_entry(problem, t, 0) * -1.0)
    sol = conic.solve(problem, max(tol * 1e-2, 1e-9))
    if not sol.optimal:
        raise Indeterminate(f"margin solve ended with status {sol.status}")
    return -sol.objective


# ---------------------------------------------------------------------------
# base specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseSpec:
    """A cone provider plus the base function f1.

    For Inherited providers f1 is a faithful state on S given by its values
    on the basis; for DualCP providers f1 is evaluation at the unit,
    f1(phi) = phi(1), and ``f1_vals`` must be None.
    """

    provider: Provider
    f1_vals: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.provider, DualCP):
            if self.f1_vals is not None:
                raise ConesError("DualCP base function is evaluation at the unit")
            return
        if self.f1_vals is None:
            raise ConesError("Inherited base needs f1 values on the basis")
        vals = np.asarray(self.f1_vals).reshape(-1).astype(complex)
        sys_ = self.provider.system
        if vals.shape[0] != sys_.dim:
            raise ConesError("f1 values must match the basis length")
        # selfadjoint: f1(a*) = conj f1(a)  <=>  adjoint_mat @ vals = conj(vals)
        if np.abs(sys_.adjoint_mat @ vals - vals.conj()).max() > 1e-8:
            raise ConesError("f1 is not selfadjoint")
        at_unit = complex(np.dot(sys_.unit_coords, vals))
        if abs(at_unit - 1.0) > 1e-8:
            raise ConesError("f1 is not a state (f1(1) != 1)")
        object.__setattr__(self, "f1_vals", vals)

    @property
    def system(self) -> ConcreteOperatorSystem:
        return self.provider.system

    @property
    def level_cap(self) -> int:
        return self.provider.max_level

    def f1_density(self, system: ConcreteOperatorSystem) -> np.ndarray:
        """F with f1(a) = tr(F* a) on the span (Inherited only)."""
        f = sum(v.conjugate() * b for v, b in zip(self.f1_vals, system.basis))
        return matcore.herm(f)

    def f1_apply(self, x) -> np.ndarray:
        """f1^(n)(x) as an n x n scalar matrix."""
        if isinstance(self.provider, Inherited):
            if not isinstance(x, SysElement):
                raise ConesError("expected a SysElement")
            return np.einsum("r,rij->ij", self.f1_vals, x.coeffs)
        if not isinstance(x, DualElement):
            raise ConesError("expected a DualElement")
        return np.einsum("r,rij->ij", x.system.unit_coords, x.values)

    def reference_base_point(self, n: int):
        """A concrete element of K_n (used by decompositions)."""
        sys_ = self.system
        if isinstance(self.provider, Inherited):
            return opsys.unit(sys_, n)
        eye = np.eye(n)
        vals = np.stack([(np.trace(b) / sys_.d) * eye for b in sys_.basis])
        return DualElement(sys_, vals)

    def in_base(self, x, tol: float = 1e-7):
        """Cone membership together with f1^(n)(x) = I_n."""
        member, cert = is_member(self.provider, x, tol)
        f1x = self.f1_apply(x)
        on_hyperplane = matcore.spectral_norm(f1x - np.eye(x.level)) <= tol
        return member and on_hyperplane, cert

    def strict_positivity_certificate(self, tol: float = 1e-7) -> float:
        """min f1(x) over trace-normalized cone members; > tol iff f1 faithful.

        For DualCP the value is identically 1 (the normalization is the
        objective); the solve still exercises the encoding.
        """
        problem = ConicProblem()
        h = encode_membership(self.provider, problem, 1)
        if isinstance(self.provider, Inherited):
            sys_ = self.system
            problem.add_eq_expr(h.var.inner_re(np.eye(sys_.d)), 1.0)
            problem.set_objective(h.f1_re(self, 0, 0))
        else:
            d = self.system.d
            problem.add_eq_expr(h.choi.inner_re(np.eye(d)), 1.0)
            problem.set_objective(h.f1_re(self, 0, 0))
        sol = conic.solve(problem, 1e-8)
        if not sol.optimal:
            raise Indeterminate(f"strict positivity solve ended {sol.status}")
        return sol.objective


def in_base(bs: BaseSpec, x, tol: float = 1e-7) -> bool:
    return bs.in_base(x, tol)[0]


# ---------------------------------------------------------------------------
# bipolar verification
# ---------------------------------------------------------------------------

@dataclass
class BipolarRecord:
    level: int
    eig_margin: float
    dual_margin: float
    agree: bool
    witness_pairing: float | None  # for non-members: certified separating pairing


@dataclass
class BipolarReport:
    records: list[BipolarRecord]
    disagreements: int
    max_margin_gap: float

    @property
    def ok(self) -> bool:
        return self.disagreements == 0


def _dual_route_margin(system: ConcreteOperatorSystem, x: SysElement, tol: float) -> float:
    """min <psi, x> over Choi-certified dual elements with tr psi(1) = 1.

    By the bipolar identity this equals the smallest ambient eigenvalue.
    """
    n, d = x.level, system.d
    r = matcore.canonical_shuffle(opsys.ambient(x), n, d)
    problem = ConicProblem()
    choi = HermVar(problem, d * n, system.field)
    problem.add_eq_expr(choi.inner_re(np.eye(d * n)), 1.0)
    problem.set_objective(choi.inner_re(matcore.herm(r)))
    sol = conic.solve(problem, max(tol * 1e-2, 1e-9))
    if not sol.optimal:
        raise Indeterminate(f"dual-route solve ended {sol.status}")
    return sol.objective


def eigenvector_witness(system: ConcreteOperatorSystem, x: SysElement) -> DualElement:
    """The compression map a -> V* a V built from the bottom eigenvector."""
    amb = matcore.herm(opsys.ambient(x))
    w, v = matcore.herm_eig(amb)
    vec = v[:, 0]
    n, d = x.level, system.d
    vmat = vec.reshape(n, d).T  # columns v_i in C^d
    vals = np.stack([vmat.conj().T @ b @ vmat for b in system.basis])
    return DualElement(system, vals)


def bipolar_check(
    provider: Inherited,
    samples,
    tol: float = 1e-7,
) -> BipolarReport:
    """Agreement of primal (eigen) and dual-cone (conic) membership routes.

    For each sampled selfadjoint element the inherited-cone margin must match
    the optimum of the dual-route program; non-members must additionally be
    separated by a certified dual element whose pairing reproduces the
    negative margin.
    """
    if not isinstance(provider, Inherited):
        raise ConesError("bipolar check runs on an Inherited provider")
    sys_ = provider.system
    dual_provider = DualCP(sys_, provider.max_level)
    records: list[BipolarRecord] = []
    disagreements = 0
    max_gap = 0.0
    for x in samples:
        amb = matcore.herm(opsys.ambient(x))
        scale = max(1.0, matcore.spectral_norm(amb))
        eig_margin = matcore.min_eig(amb)
        dual_margin = _dual_route_margin(sys_, x, tol)
        gap = abs(eig_margin - dual_margin) / scale
        max_gap = max(max_gap, gap)
        in_primal = eig_margin >= -tol * scale
        in_dual = dual_margin >= -tol * scale - gap * scale
        agree = gap <= 10 * tol and (
            in_primal == in_dual or min(abs(eig_margin), abs(dual_margin)) <= 10 * tol * scale
        )
        witness_pairing = None
        if eig_margin < -tol * scale:
            psi = eigenvector_witness(sys_, x)
            ok_member, _ = is_member(dual_provider, psi, tol)
            pairing = scalar_pairing(psi, x).real
            witness_pairing = pairing
            if not ok_member or pairing > eig_margin + 10 * tol * scale:
                agree = False
        if not agree:
            disagreements += 1
        records.append(BipolarRecord(x.level, eig_margin, dual_margin, agree, witness_pairing))
    return BipolarReport(records, disagreements, max_gap)
