"""Level-1 (classical) base norm theory over polytope bases.

A base space here is a finite point set K spanning R^dim together with the
functional f1 that is identically 1 on K.  The gauge of co(K u -K) is an LP;
the complex extended base norm  inf sum |t_i|  over u = sum
t_i k_i  is a small conic program (one 2x2 PSD block per modulus); Taylor
norms are computed by the unit-circle formula with grid + golden-section
refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import conic, matcore, opsys
from .conic import ConicProblem

GOLD = (np.sqrt(5.0) - 1.0) / 2.0


class ClassicalError(ValueError):
    pass


@dataclass(frozen=True)
class ClassicalBaseSpace:
    dim: int
    base_points: np.ndarray  # (k, dim), rows are the points of K
    f1: np.ndarray           # f1 . k_i = 1 for every i

    @property
    def npoints(self) -> int:
        return self.base_points.shape[0]


def make_base_space(base_points) -> ClassicalBaseSpace:
    """Solve f1 from the points; rejects rank-deficient or off-hyperplane data."""
    pts = np.atleast_2d(np.asarray(base_points, dtype=float))
    k, dim = pts.shape
    if np.linalg.matrix_rank(pts, tol=1e-10) < dim:
        raise ClassicalError("base points do not span the space")
    f1, *_ = np.linalg.lstsq(pts, np.ones(k), rcond=None)
    if np.abs(pts @ f1 - 1.0).max() > 1e-9:
        raise ClassicalError("base points do not lie on a common hyperplane f1 = 1")
    # cone properness is automatic: f1 = 1 on K kills cone(K) & -cone(K)
    return ClassicalBaseSpace(dim, pts, f1)


def simplex_space(n: int) -> ClassicalBaseSpace:
    return make_base_space(np.eye(n))


@dataclass(frozen=True)
class ComplexPoint:
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if np.asarray(self.re).shape != np.asarray(self.im).shape:
            raise ClassicalError("real and imaginary parts disagree in shape")


def minkowski_gauge(sp: ClassicalBaseSpace, u) -> float:
    """inf (c1 + c2) over u = c1 k1 - c2 k2 with k_i in conv(K); an exact LP."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != sp.dim:
        raise ClassicalError("vector dimension mismatch")
    k = sp.npoints
    c = np.ones(2 * k)
    a_eq = np.hstack([sp.base_points.T, -sp.base_points.T])
    res = linprog(c, A_eq=a_eq, b_eq=u, bounds=(0, None), method="highs")
    if not res.success:
        raise ClassicalError(f"gauge LP failed: {res.message}")
    return float(res.fun)


def dual_gauge(sp: ClassicalBaseSpace, f) -> float:
    """Dual norm of the gauge: max over K of |f(k)|."""
    f = np.asarray(f, dtype=float).reshape(-1)
    return float(np.abs(sp.base_points @ f).max())


def extended_base_norm(sp: ClassicalBaseSpace, u: ComplexPoint, tol: float = 1e-9) -> float:
    """inf sum |t_i| over u = sum t_i k_i, t_i complex.

    Each modulus |t_i| <= r_i is one 2x2 PSD block [[r+a, b], [b, r-a]] with
    t_i = a + ib; the objective reads r_i off the block traces.
    """
    ur = np.asarray(u.re, dtype=float).reshape(-1)
    ui = np.asarray(u.im, dtype=float).reshape(-1)
    if ur.shape[0] != sp.dim:
        raise ClassicalError("vector dimension mismatch")
    k = sp.npoints
    problem = ConicProblem()
    blocks = [problem.new_psd(2) for _ in range(k)]

    def a_expr(i):
        return (conic.expr_entry(problem, blocks[i], 0, 0)
                - conic.expr_entry(problem, blocks[i], 1, 1)) * 0.5

    def b_expr(i):
        return conic.expr_entry(problem, blocks[i], 0, 1)

    for d in range(sp.dim):
        re_row = conic.LinExpr()
        im_row = conic.LinExpr()
        for i in range(k):
            re_row = re_row + a_expr(i) * float(sp.base_points[i, d])
            im_row = im_row + b_expr(i) * float(sp.base_points[i, d])
        problem.add_eq_expr(re_row, float(ur[d]))
        problem.add_eq_expr(im_row, float(ui[d]))
    obj = conic.LinExpr()
    for i in range(k):
        obj = obj + (conic.expr_entry(problem, blocks[i], 0, 0)
                     + conic.expr_entry(problem, blocks[i], 1, 1)) * 0.5
    problem.set_objective(obj)
    sol = conic.solve(problem, tol)
    if sol.status == conic.PRIMAL_INFEASIBLE:
        raise ClassicalError("point is outside the complex span of the base")
    if not sol.optimal:
        raise conic.SolverFailure(f"extended base norm solve ended {sol.status}")
    return max(sol.objective, 0.0)


def taylor_norm(x, y, norm_oracle, grid: int = 720, theta_tol: float = 1e-8) -> float:
    """Unit-circle norm sup_theta oracle(cos(theta) x + sin(theta) y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def val(theta: float) -> float:
        return float(norm_oracle(np.cos(theta) * x + np.sin(theta) * y))

    thetas = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    vals = [val(t) for t in thetas]
    best = int(np.argmax(vals))
    step = 2.0 * np.pi / grid
    lo, hi = thetas[best] - step, thetas[best] + step
    # golden-section ascent on the bracketing interval
    a, b = lo, hi
    c = b - GOLD * (b - a)
    d = a + GOLD * (b - a)
    fc, fd = val(c), val(d)
    while b - a > theta_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLD * (b - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLD * (b - a)
            fd = val(d)
    return max(max(vals), fc, fd)


def abs_conv_hull_membership(sp: ClassicalBaseSpace, u: ComplexPoint, tol: float = 1e-7) -> bool:
    """u in closed abs-conv(K) iff its extended base norm is at most 1."""
    return extended_base_norm(sp, u) <= 1.0 + tol


# ---------------------------------------------------------------------------
# Taylor / dual-Taylor duality
# ---------------------------------------------------------------------------

def complex_pairing(u: ComplexPoint, v: ComplexPoint) -> complex:
    """Bilinear pairing of complexified vectors, sum_j v_j u_j."""
    uu = np.asarray(u.re, dtype=float) + 1j * np.asarray(u.im, dtype=float)
    vv = np.asarray(v.re, dtype=float) + 1j * np.asarray(v.im, dtype=float)
    return complex(np.sum(uu * vv))


def functional_taylor_norm(sp: ClassicalBaseSpace, v: ComplexPoint) -> float:
    """Taylor norm of a functional pair, with the dual gauge as real oracle."""
    return taylor_norm(v.re, v.im, lambda f: dual_gauge(sp, f))


@dataclass
class TaylorDualityRecord:
    name: str
    observed: float
    bound: float
    ok: bool


@dataclass
class TaylorDualityReport:
    records: list[TaylorDualityRecord]
    max_recovery_defect: float

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)


def taylor_duality_check(
    sp: ClassicalBaseSpace,
    pairs: int = 100,
    seed: int = 0,
    recover_tol: float = 0.02,
    real_tol: float = 1e-7,
) -> TaylorDualityReport:
    """|<u, v>| <= |u|_T* |v|_T on samples; sampled sup recovers |u|_T*.

    The v-sampler mixes random directions with the phase-aligned candidate
    built from u (uniform phase sampling alone cannot reach the 2% recovery
    requirement in dimension 5).
    """
    rng = np.random.default_rng(seed)
    dim = sp.dim
    records: list[TaylorDualityRecord] = []
    max_defect = 0.0
    n_u = max(pairs // 10, 1)
    n_v = max(pairs // n_u, 1)
    for s in range(n_u):
        u = ComplexPoint(rng.normal(size=dim), rng.normal(size=dim))
        nu = extended_base_norm(sp, u)
        best = 0.0
        vs = [ComplexPoint(rng.normal(size=dim), rng.normal(size=dim)) for _ in range(n_v)]
        uu = u.re + 1j * u.im
        phases = np.where(np.abs(uu) > 1e-14, uu.conj() / np.maximum(np.abs(uu), 1e-14), 1.0)
        vs.append(ComplexPoint(phases.real, phases.imag))
        for t, v in enumerate(vs):
            nv = functional_taylor_norm(sp, v)
            if nv <= 1e-14:
                continue
            pairing = abs(complex_pairing(u, v))
            ok = pairing <= nu * nv * (1.0 + 1e-9) + 1e-9
            records.append(
                TaylorDualityRecord(f"holder u={s} v={t}", pairing, nu * nv, ok)
            )
            best = max(best, pairing / nv)
        defect = (nu - best) / max(nu, 1e-14)
        max_defect = max(max_defect, defect)
        records.append(
            TaylorDualityRecord(f"recovery u={s}", defect, recover_tol, defect <= recover_tol)
        )
        # real points: extended norm equals the Minkowski gauge
        xr = rng.normal(size=dim)
        e_real = extended_base_norm(sp, ComplexPoint(xr, np.zeros(dim)))
        g_real = minkowski_gauge(sp, xr)
        records.append(
            TaylorDualityRecord(
                f"real point u={s}", abs(e_real - g_real), real_tol, abs(e_real - g_real) <= real_tol
            )
        )
        # base function contractivity |f1(u)| <= |u|_T*
        f1u = abs(complex(np.dot(sp.f1, uu)))
        records.append(
            TaylorDualityRecord(f"f1 contractive u={s}", f1u, nu + 1e-9, f1u <= nu + 1e-9)
        )
    return TaylorDualityReport(records, max_defect)


# ---------------------------------------------------------------------------
# polytope-cone closure idempotence
# ---------------------------------------------------------------------------

def _in_hull(points: np.ndarray, target: np.ndarray, tol: float = 1e-9) -> bool:
    k = points.shape[0]
    res = linprog(
        np.zeros(k),
        A_eq=np.vstack([points.T, np.ones((1, k))]),
        b_eq=np.concatenate([target, [1.0]]),
        bounds=(0, None),
        method="highs",
    )
    if res.success:
        return True
    # tolerance pass: minimize l1 infeasibility via the gauge trick
    return bool(
        res.status == 2
        and minkowski_distance_to_hull(points, target) <= tol
    )


def minkowski_distance_to_hull(points: np.ndarray, target: np.ndarray) -> float:
    """min_l |points^T l - target|_1 over convex weights l."""
    k, dim = points.shape
    # variables: l (k), s+ (dim), s- (dim); points^T l + s+ - s- = target
    c = np.concatenate([np.zeros(k), np.ones(2 * dim)])
    a_eq = np.vstack(
        [
            np.hstack([points.T, np.eye(dim), -np.eye(dim)]),
            np.hstack([np.ones((1, k)), np.zeros((1, 2 * dim))]),
        ]
    )
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return float(res.fun) if res.success else np.inf


def hull_vertices(points: np.ndarray, tol: float = 1e-9) -> list[int]:
    """Indices of points not in the hull of the others (LP vertex enumeration)."""
    out = []
    for i in range(points.shape[0]):
        rest = np.delete(points, i, axis=0)
        if not _in_hull(rest, points[i], tol):
            out.append(i)
    return out


@dataclass
class ClosureReport:
    hull_equal: bool
    vertices_original: int
    vertices_derived: int
    vertices_matched: bool
    max_defect: float


def cone_closure_idempotence(sp: ClassicalBaseSpace, tol: float = 1e-8) -> ClosureReport:
    """Re-derive K = cone(K) intersect {f1 = 1} and compare hulls.

    Finitely generated cones are closed, so the derived base must equal the
    original up to convex-hull equality; vertex sets must match after
    deduplication of interior points.
    """
    gens = sp.base_points
    scales = gens @ sp.f1
    derived = gens / scales[:, None]
    defect = 0.0
    for p in derived:
        defect = max(defect, minkowski_distance_to_hull(sp.base_points, p))
    for p in sp.base_points:
        defect = max(defect, minkowski_distance_to_hull(derived, p))
    hull_equal = defect <= tol
    vo = hull_vertices(sp.base_points)
    vd = hull_vertices(derived)
    vmatch = len(vo) == len(vd) and all(
        min(np.linalg.norm(derived[j] - sp.base_points[i]) for j in vd) <= 1e-7 for i in vo
    )
    return ClosureReport(hull_equal, len(vo), len(vd), vmatch, defect)


# ---------------------------------------------------------------------------
# complexification of a real operator system
# ---------------------------------------------------------------------------

@dataclass
class ComplexifyRecord:
    name: str
    observed: float
    bound: float
    ok: bool


@dataclass
class ComplexifyReport:
    records: list[ComplexifyRecord]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)


def c_pair(x: opsys.SysElement, y: opsys.SysElement) -> opsys.SysElement:
    """c(x, y) = [[x, y], [-y, x]] in M_{2n}(S)."""
    n, dim = x.level, x.system.dim
    coeffs = np.zeros((dim, 2 * n, 2 * n), dtype=x.coeffs.dtype)
    coeffs[:, :n, :n] = x.coeffs
    coeffs[:, :n, n:] = y.coeffs
    coeffs[:, n:, :n] = -y.coeffs
    coeffs[:, n:, n:] = x.coeffs
    return opsys.SysElement(x.system, coeffs)


def complexify_check(
    system: opsys.ConcreteOperatorSystem,
    samples: int = 20,
    tol: float = 1e-7,
    seed: int = 0,
    level: int = 1,
    f1_vals=None,
) -> ComplexifyReport:
    """Norm and base correspondence between S_c and c(x, y) pairs in M_2n(S).

    Checks, per sampled real pair (x, y): the matrix norm of x + iy in the
    complex span equals the norm of c(x, y); the adjoint pattern
    |(x+iy)*| = |c(x, -y)|; and membership correspondence for the bases cut
    by a faithful state (members built on the complex side, then split).
    """
    from . import cones, sampling

    if system.field != "R":
        raise ClassicalError("complexify_check needs a real-field system")
    rng = sampling.rng_from_seed(seed)
    sys_c = opsys.make_opsys(list(system.basis), field="C")
    if f1_vals is None:
        f1_vals = sampling.random_faithful_state_values(system, rng)
    f1_density = cones.BaseSpec(cones.Inherited(system), f1_vals).f1_density(system)
    f1c_vals = np.array([np.trace(matcore.herm(f1_density).conj().T @ b) for b in sys_c.basis])
    bs_real = cones.BaseSpec(cones.Inherited(system, max_level=2 * level + 2), f1_vals)
    bs_cplx = cones.BaseSpec(cones.Inherited(sys_c, max_level=2 * level + 2), f1c_vals)

    records: list[ComplexifyRecord] = []
    for s in range(samples):
        x = sampling.random_element(system, level, rng)
        y = sampling.random_element(system, level, rng)
        amb_c = opsys.ambient(x) + 1j * opsys.ambient(y)
        zc = opsys.from_ambient(sys_c, amb_c)
        n1 = opsys.matrix_norm(zc)
        n2 = opsys.matrix_norm(c_pair(x, y))
        records.append(ComplexifyRecord(f"norm s={s}", abs(n1 - n2), tol * (1 + n1), abs(n1 - n2) <= tol * (1 + n1)))
        zs = opsys.adjoint(zc)
        n3 = opsys.matrix_norm(zs)
        n4 = opsys.matrix_norm(c_pair(*_split(system, opsys.ambient(zs))))
        records.append(ComplexifyRecord(f"adjoint s={s}", abs(n3 - n4), tol * (1 + n3), abs(n3 - n4) <= tol * (1 + n3)))

    # base correspondence: complex-side members and scaled non-members
    for s in range(max(samples // 2, 3)):
        kc = sampling.random_base_element(bs_cplx, level, rng)
        x, y = _split(system, opsys.ambient(kc))
        in_c = cones.in_base(bs_cplx, kc, tol=1e-7)
        in_r = cones.in_base(bs_real, c_pair(x, y), tol=1e-7)
        records.append(ComplexifyRecord(f"base member s={s}", float(in_c == in_r), 1.0, in_c and in_r))
        bad = kc * 1.5
        xb, yb = _split(system, opsys.ambient(bad))
        out_c = cones.in_base(bs_cplx, bad, tol=1e-7)
        out_r = cones.in_base(bs_real, c_pair(xb, yb), tol=1e-7)
        records.append(
            ComplexifyRecord(f"base nonmember s={s}", float(out_c == out_r), 1.0, (not out_c) and (not out_r))
        )
    return ComplexifyReport(records)


def _split(system: opsys.ConcreteOperatorSystem, amb_c: np.ndarray):
    x = opsys.from_ambient(system, amb_c.real)
    y = opsys.from_ambient(system, amb_c.imag)
    return x, y


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def base_space_to_json(sp: ClassicalBaseSpace) -> dict:
    return {
        "dim": sp.dim,
        "field": "R",
        "base_points": [[float(v) for v in row] for row in sp.base_points],
        "f1": [float(v) for v in sp.f1],
    }


def base_space_from_json(obj: dict) -> ClassicalBaseSpace:
    sp = make_base_space(np.array(obj["base_points"], dtype=float))
    if "f1" in obj and np.abs(np.array(obj["f1"]) - sp.f1).max() > 1e-7:
        raise ClassicalError("stored f1 disagrees with the solved base function")
    return sp
