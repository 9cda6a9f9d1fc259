"""Standard-form conic optimization layer.

Problems are: minimize a linear objective over variable blocks (PSD matrix /
nonnegative vector / free vector) subject to scalar linear equality
constraints.  Inequalities are modeled by the caller through explicit slack
blocks.  All data is real; complex (Hermitian) matrix variables enter through
the doubling embedding [[Re, -Im], [Im, Re]] (see :func:`complex_embed` and
:class:`HermVar`).

The engine is cvxopt's primal-dual interior point method (``solvers.conelp``):
it returns gap-certified optima and Farkas-type certificates on infeasible
problems.  Stopping is scale invariant: the reported gap is measured relative
to 1 + |objective|.

Coefficient convention: a PSD-block coefficient is a k x k array A with
contribution ``sum(A * X)`` (X symmetric); vector blocks contribute ``a . x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from cvxopt import matrix as cvxmat
from cvxopt import solvers

PSD = "psd"
NONNEG = "nonneg"
FREE = "free"

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
INACCURATE = "inaccurate"

# (abstol, reltol, feastol) ladder; first rung that certifies wins.
_TOL_LADDER = ((1e-9, 1e-9, 1e-9), (1e-8, 1e-8, 1e-8), (2e-7, 2e-7, 2e-7))

_SOLVE_COUNT = 0


def solve_count() -> int:
    """Number of engine invocations in this process (observability only)."""
    return _SOLVE_COUNT


class ConicError(ValueError):
    """Ill-formed problem (dimension mismatch, unconstrained free variable...)."""


class SolverFailure(RuntimeError):
    """The engine could not certify a solution at the requested tolerance."""


@dataclass
class LinExpr:
    """Linear expression over problem blocks: sum of <coeff, block> + const."""

    coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    const: float = 0.0

    def add(self, block: int, coeff: np.ndarray, scale: float = 1.0) -> "LinExpr":
        cur = self.coeffs.get(block)
        if cur is None:
            self.coeffs[block] = scale * np.asarray(coeff, dtype=float)
        else:
            cur += scale * np.asarray(coeff, dtype=float)
        return self

    def add_entry(self, block: int, index, weight: float = 1.0) -> "LinExpr":
        cur = self.coeffs.get(block)
        if cur is None:
            raise ConicError("add_entry needs a preallocated coefficient array")
        cur[index] += weight
        return self

    def __add__(self, other: "LinExpr | float") -> "LinExpr":
        out = LinExpr({k: v.copy() for k, v in self.coeffs.items()}, self.const)
        if isinstance(other, LinExpr):
            for k, v in other.coeffs.items():
                out.add(k, v)
            out.const += other.const
        else:
            out.const += float(other)
        return out

    def __sub__(self, other: "LinExpr | float") -> "LinExpr":
        return self + (other * -1.0 if isinstance(other, LinExpr) else -float(other))

    def __mul__(self, s: float) -> "LinExpr":
        return LinExpr({k: s * v for k, v in self.coeffs.items()}, s * self.const)

    __rmul__ = __mul__


def expr_entry(problem: "ConicProblem", block: int, i: int, j: int | None = None) -> LinExpr:
    """Expression selecting one scalar entry of a block."""
    kind, size = problem.blocks[block]
    e = LinExpr()
    if kind == PSD:
        a = np.zeros((size, size))
        a[i, j] = 1.0
        e.coeffs[block] = a
    else:
        a = np.zeros(size)
        a[i] = 1.0
        e.coeffs[block] = a
    return e


class ConicProblem:
    """Block-structured conic program in standard form."""

    def __init__(self) -> None:
        self.blocks: list[tuple[str, int]] = []
        self.equalities: list[tuple[dict[int, np.ndarray], float]] = []
        self.objective: dict[int, np.ndarray] = {}
        self.obj_const: float = 0.0

    def new_psd(self, k: int) -> int:
        if k < 1:
            raise ConicError("PSD block size must be >= 1")
        self.blocks.append((PSD, k))
        return len(self.blocks) - 1

    def new_nonneg(self, m: int) -> int:
        self.blocks.append((NONNEG, m))
        return len(self.blocks) - 1

    def new_free(self, m: int) -> int:
        self.blocks.append((FREE, m))
        return len(self.blocks) - 1

    def _check(self, coeffs: dict[int, np.ndarray]) -> None:
        for b, a in coeffs.items():
            kind, size = self.blocks[b]
            want = (size, size) if kind == PSD else (size,)
            if np.asarray(a).shape != want:
                raise ConicError(
                    f"coefficient shape {np.asarray(a).shape} vs block {kind}({size})"
                )

    def add_eq(self, coeffs: dict[int, np.ndarray], rhs: float) -> None:
        self._check(coeffs)
        self.equalities.append((coeffs, float(rhs)))

    def add_eq_expr(self, lhs: LinExpr, rhs: "LinExpr | float" = 0.0) -> None:
        diff = lhs - rhs if isinstance(rhs, LinExpr) else lhs
        target = -diff.const if isinstance(rhs, LinExpr) else float(rhs) - diff.const
        self.add_eq(diff.coeffs, target)

    def set_objective(self, expr: LinExpr) -> None:
        self._check(expr.coeffs)
        self.objective = expr.coeffs
        self.obj_const = expr.const


@dataclass
class ConicSolution:
    status: str
    primal: dict[int, np.ndarray]
    eq_duals: np.ndarray | None
    cone_duals: dict[int, np.ndarray]
    objective: float
    gap: float

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# -- translation to cvxopt -------------------------------------------------

def _layout(problem: ConicProblem):
    """Column layout: PSD blocks use the packed upper triangle."""
    offsets, ncols = [], 0
    for kind, size in problem.blocks:
        offsets.append(ncols)
        ncols += size * (size + 1) // 2 if kind == PSD else size
    return offsets, ncols


def _psd_cols(size: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(size) for j in range(i, size)]


def _row_from_coeffs(problem, offsets, ncols, coeffs) -> np.ndarray:
    row = np.zeros(ncols)
    for b, a in coeffs.items():
        kind, size = problem.blocks[b]
        off = offsets[b]
        if kind == PSD:
            s = (np.asarray(a) + np.asarray(a).T) / 2
            t = 0
            for i in range(size):
                row[off + t] += s[i, i]
                t += 1
                for j in range(i + 1, size):
                    row[off + t] += 2 * s[i, j]
                    t += 1
        else:
            row[off : off + size] += np.asarray(a)
    return row


def _independent_rows(a: np.ndarray, rtol: float = 1e-11):
    """Indices of a maximal independent row subset, via pivoted QR of a^T."""
    if a.shape[0] == 0:
        return np.array([], dtype=int)
    _, r, piv = scipy.linalg.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.array([], dtype=int)
    rank = int(np.sum(diag > rtol * diag[0]))
    return np.sort(piv[:rank])


def solve(problem: ConicProblem, tol: float = 1e-8) -> ConicSolution:
    """Solve the program; Optimal answers are gap-certified at tol.

    On infeasible statuses the certificate ray is returned in place of the
    primal/dual values.  'inaccurate' means the engine could not certify
    anything (treated as a hard error by norm computations upstream).
    """
    global _SOLVE_COUNT
    _SOLVE_COUNT += 1
    if not 1e-10 <= tol <= 1e-4:
        raise ConicError("tol must lie in [1e-10, 1e-4]")
    offsets, ncols = _layout(problem)
    if ncols == 0:
        raise ConicError("problem has no variables")

    lin_rows: list[int] = [b for b, (k, _) in enumerate(problem.blocks) if k == NONNEG]
    psd_rows: list[int] = [b for b, (k, _) in enumerate(problem.blocks) if k == PSD]
    nl = sum(problem.blocks[b][1] for b in lin_rows)
    ns = sum(problem.blocks[b][1] ** 2 for b in psd_rows)
    if nl + ns == 0:
        raise ConicError("problem has no conic blocks")

    g = np.zeros((nl + ns, ncols))
    r = 0
    for b in lin_rows:
        size, off = problem.blocks[b][1], offsets[b]
        for i in range(size):
            g[r, off + i] = -1.0
            r += 1
    for b in psd_rows:
        size, off = problem.blocks[b][1], offsets[b]
        colmap = {}
        for t, (i, j) in enumerate(_psd_cols(size)):
            colmap[(i, j)] = off + t
            colmap[(j, i)] = off + t
        for q in range(size):  # column-major scan of the full matrix
            for p in range(size):
                g[r, colmap[(p, q)]] = -1.0
                r += 1
    h = np.zeros(nl + ns)

    a_rows = [
        _row_from_coeffs(problem, offsets, ncols, coeffs)
        for coeffs, _ in problem.equalities
    ]
    a = np.vstack(a_rows) if a_rows else np.zeros((0, ncols))
    b_vec = np.array([rhs for _, rhs in problem.equalities])

    # consistency of the equality system, then drop dependent rows
    if a.shape[0]:
        x0, *_ = np.linalg.lstsq(a, b_vec, rcond=None)
        resid = b_vec - a @ x0
        if np.abs(resid).max(initial=0.0) > 1e-7 * max(1.0, np.abs(b_vec).max(initial=0.0)):
            return ConicSolution(PRIMAL_INFEASIBLE, {}, resid, {}, np.inf, np.inf)
        keep = _independent_rows(a)
        a, b_vec = a[keep], b_vec[keep]
    else:
        keep = np.array([], dtype=int)

    # every free variable must be pinned by an equality, else [G; A] is rank
    # deficient and the KKT system is singular
    for blk, (kind, size) in enumerate(problem.blocks):
        if kind == FREE:
            off = offsets[blk]
            cols = a[:, off : off + size] if a.shape[0] else np.zeros((0, size))
            if cols.shape[0] == 0 or not np.all(np.abs(cols).max(axis=0) > 0):
                raise ConicError("free variable appears in no equality constraint")

    c = _row_from_coeffs(problem, offsets, ncols, problem.objective)

    dims = {"l": nl, "q": [], "s": [problem.blocks[b][1] for b in psd_rows]}
    cm, gm, hm = cvxmat(c), cvxmat(g), cvxmat(h)
    am, bm = cvxmat(a), cvxmat(b_vec)

    saved = dict(solvers.options)
    sol = None
    try:
        for abstol, reltol, feastol in _TOL_LADDER:
            solvers.options.update(
                {
                    "show_progress": False,
                    "maxiters": 200,
                    "refinement": 2,
                    "abstol": abstol,
                    "reltol": reltol,
                    "feastol": feastol,
                }
            )
            try:
                sol = solvers.conelp(cm, gm, hm, dims, am, bm)
            except (ZeroDivisionError, ArithmeticError, ValueError):
                sol = None
                continue
            if sol["status"] != "unknown":
                break
    finally:
        solvers.options.clear()
        solvers.options.update(saved)

    if sol is None or sol["status"] == "unknown":
        return ConicSolution(INACCURATE, {}, None, {}, np.nan, np.inf)

    status = {
        "optimal": OPTIMAL,
        "primal infeasible": PRIMAL_INFEASIBLE,
        "dual infeasible": DUAL_INFEASIBLE,
    }[sol["status"]]

    def unpack_primal(xv: np.ndarray) -> dict[int, np.ndarray]:
        out = {}
        for blk, (kind, size) in enumerate(problem.blocks):
            off = offsets[blk]
            if kind == PSD:
                m = np.zeros((size, size))
                for t, (i, j) in enumerate(_psd_cols(size)):
                    m[i, j] = m[j, i] = xv[off + t]
                out[blk] = m
            else:
                out[blk] = xv[off : off + size].copy()
        return out

    def unpack_cone_duals(zv: np.ndarray) -> dict[int, np.ndarray]:
        out, pos = {}, 0
        for blk in lin_rows:
            size = problem.blocks[blk][1]
            out[blk] = zv[pos : pos + size].copy()
            pos += size
        for blk in psd_rows:
            size = problem.blocks[blk][1]
            out[blk] = zv[pos : pos + size * size].reshape(size, size, order="F").copy()
            pos += size * size
        return out

    if status != OPTIMAL:
        primal = unpack_primal(np.array(sol["x"]).ravel()) if sol["x"] is not None else {}
        cone_duals = (
            unpack_cone_duals(np.array(sol["z"]).ravel()) if sol["z"] is not None else {}
        )
        return ConicSolution(status, primal, None, cone_duals, np.inf, np.inf)

    xv = np.array(sol["x"]).ravel()
    obj = float(c @ xv) + problem.obj_const
    gap = float(sol["gap"]) / (1.0 + abs(obj))
    if gap > tol:
        return ConicSolution(INACCURATE, unpack_primal(xv), None, {}, obj, gap)

    y_full = np.zeros(len(problem.equalities))
    if keep.size:
        y_full[keep] = np.array(sol["y"]).ravel()
    return ConicSolution(
        OPTIMAL,
        unpack_primal(xv),
        y_full,
        unpack_cone_duals(np.array(sol["z"]).ravel()),
        obj,
        gap,
    )


# -- complex embedding ------------------------------------------------------

def complex_embed(h: np.ndarray) -> np.ndarray:
    """Real symmetric [[Re h, -Im h], [Im h, Re h]] of a Hermitian matrix.

    PSD iff h is PSD; the trace doubles; each eigenvalue of h appears twice,
    so the minimum eigenvalue is preserved exactly.
    """
    from . import matcore

    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConicError(f"expected a square matrix, got {h.shape}")
    if not matcore.is_hermitian(h, tol=1e-10):
        raise ConicError("complex_embed requires a Hermitian matrix")
    re, im = np.real(h), np.imag(h)
    return np.block([[re, -im], [im, re]])


class HermVar:
    """A Hermitian (or real symmetric) PSD matrix variable of logical size n.

    Over the real field this is one PSD block; over the complex field it is
    the doubled real embedding, with entry expressions averaged over the two
    copies so every constraint built from them is invariant under the
    embedding symmetry.  PSD-ness of the doubled block then certifies
    PSD-ness of the extracted Hermitian matrix.
    """

    def __init__(self, problem: ConicProblem, n: int, field: str) -> None:
        if field not in ("R", "C"):
            raise ConicError(f"unknown field tag {field!r}")
        self.n = n
        self.field = field
        self.problem = problem
        self.block = problem.new_psd(n if field == "R" else 2 * n)

    def re(self, p: int, q: int) -> LinExpr:
        e = LinExpr()
        n = self.n
        if self.field == "R":
            a = np.zeros((n, n))
            a[p, q] = 1.0
        else:
            a = np.zeros((2 * n, 2 * n))
            a[p, q] = 0.5
            a[p + n, q + n] = 0.5
        e.coeffs[self.block] = a
        return e

    def im(self, p: int, q: int) -> LinExpr:
        e = LinExpr()
        if self.field == "R":
            return e
        n = self.n
        a = np.zeros((2 * n, 2 * n))
        a[p + n, q] = 0.5
        a[p, q + n] = -0.5
        e.coeffs[self.block] = a
        return e

    def inner_re(self, a: np.ndarray) -> LinExpr:
        """Expression for Re tr(a* X) = Re <a, X>_HS."""
        a = np.asarray(a, dtype=complex)
        e = LinExpr()
        n = self.n
        if self.field == "R":
            e.coeffs[self.block] = np.real(a).astype(float)
            return e
        w = np.zeros((2 * n, 2 * n))
        w[:n, :n] = np.real(a) / 2
        w[n:, n:] = np.real(a) / 2
        w[n:, :n] = np.imag(a) / 2
        w[:n, n:] = -np.imag(a) / 2
        e.coeffs[self.block] = w
        return e

    def inner_im(self, a: np.ndarray) -> LinExpr:
        """Expression for Im tr(a* X); identically zero over the real field."""
        if self.field == "R":
            return LinExpr()
        return self.inner_re(1j * np.asarray(a, dtype=complex))

    def extract(self, solution: ConicSolution) -> np.ndarray:
        x = solution.primal[self.block]
        n = self.n
        if self.field == "R":
            return (x + x.T) / 2
        re = (x[:n, :n] + x[n:, n:]) / 2
        im = (x[n:, :n] - x[:n, n:]) / 2
        out = re + 1j * im
        return (out + out.conj().T) / 2
