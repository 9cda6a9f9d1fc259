"""The nc base norm engine.

For a base spec (cone provider C, base function f1) and selfadjoint x at
matrix level n, the base norm is

    |x|_n = min { |f1^(n)(y + z)| : x = y - z,  y, z in C_n },

modeled as an SDP by turning the norm of the (PSD) operand into the PSD
dominance  f1^(n)(y + z) <= lam * I_n.  General elements go through the
selfadjointization [[0, x], [x*, 0]] at level 2n.

The dual route computes the same number as the order-unit-style program

    min { t : exists w in C_n,  w + x in C_n,  w - x in C_n,
              f1^(n)(w) = t * I_n },

i.e. domination by t * (base element); equality of the two programs is the
content of the duality theorems and is what verify_duality measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic, cones, matcore, opsys
from .cones import BaseSpec, DualCP, DualElement, Inherited
from .conic import ConicProblem
from .opsys import SysElement

DEFAULT_SOLVE_TOL = 1e-8


class NcnormError(ValueError):
    pass


DEFAULT_MAX_MORPHISM_LEVEL = 4


class ConditionBFailure(RuntimeError):
    """A norm program was infeasible: the space is not dominated by its base."""


@dataclass
class NormResult:
    value: float
    witness_pos: object   # y in the cone
    witness_neg: object   # z in the cone
    gap: float
    residual: float       # |(y - z) - x| relative to max(1, |x|)

    def witness(self):
        return self.witness_pos, self.witness_neg


def _is_selfadjoint(x) -> bool:
    if isinstance(x, SysElement):
        return opsys.is_selfadjoint(x, tol=1e-9)
    return cones.dual_is_selfadjoint(x, tol=1e-9)


def _tilde(x):
    if isinstance(x, SysElement):
        return opsys.element_tilde(x)
    return cones.dual_tilde(x)


def _data_norm(x) -> float:
    if isinstance(x, SysElement):
        return matcore.spectral_norm(opsys.ambient(x))
    return float(np.abs(x.values).max(initial=0.0))


def _check_element(bs: BaseSpec, x) -> int:
    want = SysElement if isinstance(bs.provider, Inherited) else DualElement
    if not isinstance(x, want):
        raise NcnormError(f"element type {type(x).__name__} does not match the provider")
    return x.level


def _f1_constraints(problem: ConicProblem, bs: BaseSpec, handles, pin, n: int) -> None:
    """Pin  sum_h f1^(n)(h)  to the expression matrix ``pin`` (callable i,j)."""
    cplx = bs.system.field == "C"
    for i in range(n):
        for j in range(i, n):
            re = handles[0].f1_re(bs, i, j)
            for h in handles[1:]:
                re = re + h.f1_re(bs, i, j)
            problem.add_eq_expr(re - pin(i, j, "re"), 0.0)
            if cplx and i != j:
                im = handles[0].f1_im(bs, i, j)
                for h in handles[1:]:
                    im = im + h.f1_im(bs, i, j)
                problem.add_eq_expr(im - pin(i, j, "im"), 0.0)


def nc_base_norm_sa(bs: BaseSpec, x, tol: float = DEFAULT_SOLVE_TOL) -> NormResult:
    """Base norm of a selfadjoint element, with a decomposition witness."""
    n = _check_element(bs, x)
    if not _is_selfadjoint(x):
        raise NcnormError("nc_base_norm_sa needs a selfadjoint element")
    problem = ConicProblem()
    lam = problem.new_free(1)
    hy = cones.encode_membership(bs.provider, problem, n)
    hz = cones.encode_membership(bs.provider, problem, n)
    cones.pin_difference(hy, hz, x)
    # dominance slack: lam * I - f1(y + z) is PSD
    w = conic.HermVar(problem, n, bs.system.field)

    def pin(i, j, part):
        if part == "re":
            lam_term = conic.expr_entry(problem, lam, 0) * (1.0 if i == j else 0.0)
            return lam_term - w.re(i, j)
        return conic.LinExpr() - w.im(i, j)

    _f1_constraints(problem, bs, (hy, hz), pin, n)
    problem.set_objective(conic.expr_entry(problem, lam, 0))
    sol = conic.solve(problem, tol)
    if sol.status == conic.PRIMAL_INFEASIBLE:
        raise ConditionBFailure(
            "norm program infeasible: selfadjoint element admits no cone decomposition"
        )
    if not sol.optimal:
        raise conic.SolverFailure(f"norm solve ended with status {sol.status}")
    y = hy.extract(sol)
    z = hz.extract(sol)
    diff = y - z
    if isinstance(x, SysElement):
        resid = matcore.frob(opsys.ambient(diff) - opsys.ambient(x))
    else:
        resid = float(np.linalg.norm(diff.values - x.values))
    resid /= max(1.0, _data_norm(x))
    return NormResult(max(sol.objective, 0.0), y, z, sol.gap, resid)


def nc_base_norm(bs: BaseSpec, x, tol: float = DEFAULT_SOLVE_TOL) -> NormResult:
    """Base norm of a general element via the selfadjointization at level 2n."""
    _check_element(bs, x)
    return nc_base_norm_sa(bs, _tilde(x), tol)


def dual_order_unit_norm(bs: BaseSpec, x, tol: float = DEFAULT_SOLVE_TOL) -> float:
    """min t with t*k +- x in the cone for some base element k (w = t*k).

    The order unit is the base itself; on DualCP spaces this is the dual
    formulation of the base norm and must agree with nc_base_norm_sa.
    """
    n = _check_element(bs, x)
    if not _is_selfadjoint(x):
        raise NcnormError("dual_order_unit_norm needs a selfadjoint element")
    problem = ConicProblem()
    t = problem.new_free(1)
    h_minus = cones.encode_membership(bs.provider, problem, n)  # w - x
    h_plus = cones.encode_membership(bs.provider, problem, n)   # w + x
    # (w + x) - (w - x) = 2x
    cones.pin_difference(h_plus, h_minus, x * 2.0)
    # f1(w - x) + f1(w + x) = 2 f1(w) = 2 t I_n
    def pin(i, j, part):
        if part == "re":
            return conic.expr_entry(problem, t, 0) * (2.0 if i == j else 0.0)
        return conic.LinExpr()

    _f1_constraints(problem, bs, (h_minus, h_plus), pin, n)
    problem.set_objective(conic.expr_entry(problem, t, 0))
    sol = conic.solve(problem, tol)
    if sol.status == conic.PRIMAL_INFEASIBLE:
        raise ConditionBFailure("order-unit program infeasible: base does not dominate")
    if not sol.optimal:
        raise conic.SolverFailure(f"dual order unit solve ended with status {sol.status}")
    return max(sol.objective, 0.0)


# ---------------------------------------------------------------------------
# base decomposition (x = alpha* k alpha)
# ---------------------------------------------------------------------------

@dataclass
class BaseDecomposition:
    alpha: np.ndarray     # PSD scalar matrix, = f1^(n)(x)^(1/2)
    k: object             # base element
    residual: float       # |alpha* k alpha - x| relative to max(1, |x|)
    f1_residual: float    # |f1^(n)(k) - I_n|


def base_decompose(bs: BaseSpec, x, tol: float = 1e-7) -> BaseDecomposition:
    """Write a cone element as alpha* k alpha with k in the base.

    alpha = f1^(n)(x)^(1/2); on the support of f1^(n)(x) the base element is
    the compression of x by the restricted inverse square root, and off the
    support it is padded with a reference base point so that f1^(n)(k) = I.
    """
    n = _check_element(bs, x)
    member, _ = cones.is_member(bs.provider, x, max(tol, 1e-7))
    if not member:
        raise NcnormError("base_decompose needs a cone element")
    a = matcore.herm(bs.f1_apply(x))
    w, v = matcore.herm_eig(a)
    alpha = (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T
    m = matcore.restricted_inv_sqrt(a)
    e = matcore.support_projection(a)
    eperp = np.eye(n) - e
    k0 = bs.reference_base_point(n)
    compress = opsys.compress if isinstance(x, SysElement) else cones.dual_compress
    k = compress(x, m) + compress(k0, eperp)
    recon = compress(k, alpha)
    if isinstance(x, SysElement):
        resid = matcore.frob(opsys.ambient(recon) - opsys.ambient(x))
    else:
        resid = float(np.linalg.norm(recon.values - x.values))
    resid /= max(1.0, _data_norm(x))
    f1k = bs.f1_apply(k)
    return BaseDecomposition(alpha, k, resid, matcore.spectral_norm(f1k - np.eye(n)))


# ---------------------------------------------------------------------------
# base morphisms (quantum channels)
# ---------------------------------------------------------------------------

def is_base_morphism(bs_x: BaseSpec, bs_y: BaseSpec, u_values, tol: float = 1e-7) -> bool:
    """Is the map u (values on a basis of the source) a base morphism?

    Complete positivity is certified in one shot through the Choi-extension
    membership of the (pre)dual map; base-function intertwining f1_Y o u =
    f1_X reduces to unitality (resp. state preservation) of that map.
    """
    sx, sy = bs_x.system, bs_y.system
    if isinstance(bs_x.provider, DualCP) and isinstance(bs_y.provider, DualCP):
        # u : S_X* -> S_Y*, given by u(delta_r); the predual map goes S_Y -> S_X
        u_values = list(u_values)
        if len(u_values) != sx.dim or any(v.level != 1 for v in u_values):
            raise NcnormError("need one level-1 image per source basis functional")
        hat_vals = np.zeros((sy.dim, sx.d, sx.d), dtype=complex)
        for s in range(sy.dim):
            img = sum(
                complex(u_values[r].values[s, 0, 0]) * sx.basis[r] for r in range(sx.dim)
            )
            hat_vals[s] = img
        hat = DualElement(sy, hat_vals)  # the map S_Y -> M_{d_X}, b_s -> hat_vals[s]
        provider = DualCP(sy, max_level=max(sx.d, DEFAULT_MAX_MORPHISM_LEVEL))
        cp, _ = cones.is_member(provider, hat, tol)
        at_unit = np.einsum("s,skl->kl", sy.unit_coords, hat_vals)
        unital = matcore.spectral_norm(at_unit - np.eye(sx.d)) <= tol
        return cp and unital
    if isinstance(bs_x.provider, Inherited) and isinstance(bs_y.provider, Inherited):
        # u : S_X -> S_Y, given on the basis of S_X by d_Y x d_Y matrices
        imgs = [np.asarray(v, dtype=complex) for v in u_values]
        if len(imgs) != sx.dim or any(m.shape != (sy.d, sy.d) for m in imgs):
            raise NcnormError("need one d_Y x d_Y image per source basis element")
        for m in imgs:
            if not sy.in_span(m):
                raise NcnormError("image leaves the target system")
        hat = DualElement(sx, np.stack(imgs))
        provider = DualCP(sx, max_level=max(sy.d, DEFAULT_MAX_MORPHISM_LEVEL))
        cp, _ = cones.is_member(provider, hat, tol)
        f1y = np.asarray(bs_y.f1_vals)
        intertwined = all(
            abs(complex(np.dot(sy.coords(img), f1y)) - complex(bs_x.f1_vals[r])) <= tol
            for r, img in enumerate(imgs)
        )
        return cp and intertwined
    raise NcnormError("base morphism check needs matching provider kinds")


# ---------------------------------------------------------------------------
# cb-norm lower bound sampler (lower bounds only)
# ---------------------------------------------------------------------------

def cb_lower_bound(
    phi: DualElement,
    levels: int | None = None,
    restarts: int = 50,
    iters: int = 12,
    rng: np.random.Generator | None = None,
) -> float:
    """sup_k |phi^(k)(x)| over sampled unit-ball x, by alternating ascent.

    Rank-one compressions pick the direction; the HS gradient projected back
    to M_k(S) and renormalized in the ambient spectral norm gives the next
    iterate.  Always a valid lower bound for the cb (= dual base) norm.
    """
    rng = rng or np.random.default_rng(0)
    sys_ = phi.system
    levels = levels or phi.level
    best = 0.0
    for k in range(1, levels + 1):
        for _ in range(restarts):
            x = _random_unit_element(sys_, k, rng)
            for _ in range(iters):
                m = cones.amplified_apply(phi, x)
                u, s, vh = np.linalg.svd(m)
                best = max(best, float(s[0]))
                grad = _ascent_direction(phi, u[:, 0], vh[0].conj(), k)
                nxt = _best_candidate(phi, grad)
                if nxt is None:
                    break
                x = nxt
            best = max(best, matcore.spectral_norm(cones.amplified_apply(phi, x)))
    return best


def _best_candidate(phi: DualElement, grad: SysElement) -> SysElement | None:
    """Pick the better of the HS direction and its spectral (polar) flattening."""
    sys_ = grad.system
    amb = opsys.ambient(grad)
    nrm = matcore.spectral_norm(amb)
    if nrm <= 1e-14:
        return None
    candidates = [grad * (1.0 / nrm)]
    u, _, vh = np.linalg.svd(amb)
    polar = opsys.project_to_element(sys_, u @ vh)
    pn = matcore.spectral_norm(opsys.ambient(polar))
    if pn > 1e-14:
        candidates.append(polar * (1.0 / pn))
    vals = [matcore.spectral_norm(cones.amplified_apply(phi, c)) for c in candidates]
    return candidates[int(np.argmax(vals))]


def _random_unit_element(system, k, rng) -> SysElement:
    from . import sampling

    x = sampling.random_element(system, k, rng)
    nrm = matcore.spectral_norm(opsys.ambient(x))
    return x * (1.0 / max(nrm, 1e-14))


def _ascent_direction(phi: DualElement, u: np.ndarray, v: np.ndarray, k: int) -> SysElement:
    # l(x) = Re <u, phi^(k)(x) v> = Re sum_r tr(C_r^T G_r), maximize HS-wise
    n = phi.level
    ub = u.reshape(k, n)
    vb = v.reshape(k, n)
    coeffs = np.stack(
        [(ub.conj() @ vals @ vb.T).conj() for vals in phi.values], axis=0
    )
    # G_r[i, j] = u_i* vals_r v_j; candidate coefficients are conj(G_r)
    sys_ = phi.system
    if sys_.field == "R":
        coeffs = coeffs.real
    return opsys.element(sys_, coeffs)


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------

@dataclass
class CheckRecord:
    name: str
    status: str      # pass / fail / indeterminate
    observed: float
    bound: float
    tolerance: float


@dataclass
class SuiteReport:
    records: list[CheckRecord]

    @property
    def ok(self) -> bool:
        return all(r.status == "pass" for r in self.records)

    @property
    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status != "pass"]


def verify_duality(
    system,
    levels=(1, 2),
    samples: int = 20,
    tol: float = 1e-5,
    seed: int = 0,
    solve_tol: float = DEFAULT_SOLVE_TOL,
    cb_restarts: int = 8,
) -> SuiteReport:
    """nc_base_norm_sa == dual_order_unit_norm on M_n(S*), plus cb lower bounds."""
    from . import sampling

    rng = sampling.rng_from_seed(seed)
    bs = BaseSpec(DualCP(system, max_level=2 * max(levels)))
    records: list[CheckRecord] = []
    for n in levels:
        for s in range(samples):
            phi = sampling.random_selfadjoint_dual(system, n, rng)
            try:
                primal = nc_base_norm_sa(bs, phi, solve_tol)
                dual = dual_order_unit_norm(bs, phi, solve_tol)
            except (cones.Indeterminate, conic.SolverFailure):
                records.append(CheckRecord(f"duality n={n} s={s}", "indeterminate", np.nan, 0.0, tol))
                continue
            rel = abs(primal.value - dual) / (1.0 + primal.value)
            records.append(
                CheckRecord(
                    f"duality n={n} s={s}",
                    "pass" if rel <= tol else "fail",
                    rel,
                    tol,
                    tol,
                )
            )
            lb = cb_lower_bound(phi, levels=n, restarts=cb_restarts, rng=rng)
            slack = primal.value - lb
            records.append(
                CheckRecord(
                    f"cb-lower n={n} s={s}",
                    "pass" if slack >= -tol * (1.0 + primal.value) else "fail",
                    slack,
                    0.0,
                    tol,
                )
            )
    return SuiteReport(records)


def mbos_validate(
    bs: BaseSpec,
    levels=(1, 2),
    samples: int = 10,
    tol: float = 1e-7,
    seed: int = 0,
    t_max_factor: float = 1e4,
) -> SuiteReport:
    """Matrix base ordered space conditions (a)-(c), sampled."""
    from . import sampling

    rng = sampling.rng_from_seed(seed)
    records: list[CheckRecord] = []
    try:
        cert = bs.strict_positivity_certificate()
        records.append(
            CheckRecord("(a) f1 strictly positive", "pass" if cert > tol else "fail", cert, tol, tol)
        )
    except cones.Indeterminate:
        records.append(CheckRecord("(a) f1 strictly positive", "indeterminate", np.nan, tol, tol))

    for n in levels:
        for s in range(samples):
            x = _random_sa(bs, n, rng)
            scale = max(1.0, _data_norm(x))
            t_max = t_max_factor * scale
            try:
                t_val = _domination_scale(bs, x)
                ok = t_val <= t_max
                records.append(
                    CheckRecord(
                        f"(b) dominated n={n} s={s}",
                        "pass" if ok else "fail",
                        t_val,
                        t_max,
                        tol,
                    )
                )
            except ConditionBFailure:
                records.append(
                    CheckRecord(f"(b) dominated n={n} s={s}", "fail", np.inf, t_max, tol)
                )
            except (cones.Indeterminate, conic.SolverFailure):
                records.append(
                    CheckRecord(f"(b) dominated n={n} s={s}", "indeterminate", np.nan, t_max, tol)
                )

    # (c): small f1-mass on both sides of a decomposition forces a small norm;
    # report the worst ratio (reference norm) / (base norm) over unit samples
    worst = 0.0
    for n in levels:
        for s in range(samples):
            x = _random_sa(bs, n, rng)
            nrm = _data_norm(x)
            if nrm <= 1e-12:
                continue
            x = x * (1.0 / nrm)
            try:
                val = nc_base_norm_sa(bs, x).value
            except (cones.Indeterminate, conic.SolverFailure):
                continue
            worst = max(worst, 1.0 / max(val, 1e-30))
    records.append(
        CheckRecord(
            "(c) nondegenerate (max ref/base ratio)",
            "pass" if worst < 1e6 else "fail",
            worst,
            1e6,
            tol,
        )
    )
    return SuiteReport(records)


def _random_sa(bs: BaseSpec, n: int, rng):
    from . import sampling

    if isinstance(bs.provider, Inherited):
        return sampling.random_selfadjoint_element(bs.system, n, rng)
    return sampling.random_selfadjoint_dual(bs.system, n, rng)


def _domination_scale(bs: BaseSpec, x) -> float:
    """min t with x <= t k for a base element k (conic feasibility form)."""
    n = x.level
    problem = ConicProblem()
    t = problem.new_free(1)
    hw = cones.encode_membership(bs.provider, problem, n)   # w = t k
    hm = cones.encode_membership(bs.provider, problem, n)   # w - x
    cones.pin_difference(hw, hm, x)

    def pin(i, j, part):
        if part == "re":
            return conic.expr_entry(problem, t, 0) * (1.0 if i == j else 0.0)
        return conic.LinExpr()

    _f1_constraints(problem, bs, (hw,), pin, n)
    problem.set_objective(conic.expr_entry(problem, t, 0))
    sol = conic.solve(problem, DEFAULT_SOLVE_TOL)
    if sol.status == conic.PRIMAL_INFEASIBLE:
        raise ConditionBFailure("not dominated by any base element")
    if not sol.optimal:
        raise conic.SolverFailure(f"domination solve ended {sol.status}")
    return float(sol.objective)
