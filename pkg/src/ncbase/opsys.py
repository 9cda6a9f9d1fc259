"""Concrete finite-dimensional operator systems S inside M_d.

A system is stored through an adjoint-closed, Hilbert-Schmidt-orthonormal
basis of d x d matrices whose span contains the identity.  Elements of
M_n(S) carry an n x n coefficient block per basis matrix; the ambient
matrix  sum_r kron(C_r, b_r)  in M_{nd} is the source of truth for all
positivity and norm computations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore

SPAN_TOL = 1e-10


class OpsysError(ValueError):
    pass


@dataclass(frozen=True)
class ConcreteOperatorSystem:
    field: str                      # "R" | "C"
    d: int                          # ambient dimension
    basis: tuple[np.ndarray, ...]   # HS-orthonormal d x d matrices
    unit_coords: np.ndarray         # I_d = sum_r unit_coords[r] * basis[r]
    adjoint_mat: np.ndarray         # basis[r]* = sum_s adjoint_mat[r, s] basis[s]
    perp: tuple[np.ndarray, ...]    # HS-orthonormal basis of the orthocomplement

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coords(self, a: np.ndarray) -> np.ndarray:
        """HS coordinates of a d x d matrix lying in the span."""
        return np.array([np.vdot(b, a) for b in self.basis])

    def project(self, a: np.ndarray) -> np.ndarray:
        c = self.coords(a)
        return sum(cr * br for cr, br in zip(c, self.basis))

    def in_span(self, a: np.ndarray, tol: float = SPAN_TOL) -> bool:
        return matcore.frob(self.project(a) - a) <= tol * max(1.0, matcore.frob(a))


def make_opsys(matrices, field: str | None = None) -> ConcreteOperatorSystem:
    """Build a system from a generating set of d x d matrices.

    The generating set is augmented with adjoints and reduced to an
    orthonormal basis; linear dependence is deduplicated.  Raises if the
    identity is not in the span.
    """
    mats = [np.atleast_2d(np.asarray(m)) for m in matrices]
    if not mats:
        raise OpsysError("empty generating set")
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise OpsysError(f"generators must all be {d}x{d}, got {m.shape}")
    if field is None:
        field = "C" if any(np.iscomplexobj(m) and np.abs(m.imag).max() > 0 for m in mats) else "R"
    dtype = complex if field == "C" else float
    if field == "R":
        for m in mats:
            if np.iscomplexobj(m) and np.abs(m.imag).max(initial=0.0) > SPAN_TOL:
                raise OpsysError("complex generator in a real-field system")
    mats = [m.astype(dtype) for m in mats]

    stack = np.vstack([m.reshape(1, -1) for m in mats] + [m.conj().T.reshape(1, -1) for m in mats])
    u, s, vh = np.linalg.svd(stack, full_matrices=True)
    if s.size == 0 or s[0] <= SPAN_TOL:
        raise OpsysError("generating set spans only {0}")
    rank = int(np.sum(s > SPAN_TOL * s[0]))
    basis = tuple(vh[r].reshape(d, d).astype(dtype) for r in range(rank))
    perp = tuple(vh[r].reshape(d, d).astype(dtype) for r in range(rank, d * d))

    eye = np.eye(d, dtype=dtype)
    unit_coords = np.array([np.vdot(b, eye) for b in basis])
    recon = sum(c * b for c, b in zip(unit_coords, basis))
    if matcore.frob(recon - eye) > SPAN_TOL * d:
        raise OpsysError("unit not in span")

    adjoint_mat = np.zeros((rank, rank), dtype=dtype)
    for r, b in enumerate(basis):
        bstar = b.conj().T
        coords = np.array([np.vdot(bb, bstar) for bb in basis])
        resid = bstar - sum(c * bb for c, bb in zip(coords, basis))
        if matcore.frob(resid) > SPAN_TOL:
            raise OpsysError("span is not adjoint closed")  # unreachable by construction
        adjoint_mat[r] = coords

    return ConcreteOperatorSystem(field, d, basis, unit_coords, adjoint_mat, perp)


@dataclass(frozen=True)
class SysElement:
    """Element of M_n(S): an n x n scalar block per basis matrix."""

    system: ConcreteOperatorSystem
    coeffs: np.ndarray  # shape (dim, n, n)

    @property
    def level(self) -> int:
        return self.coeffs.shape[1]

    def __add__(self, other: "SysElement") -> "SysElement":
        _same_space(self, other)
        return SysElement(self.system, self.coeffs + other.coeffs)

    def __sub__(self, other: "SysElement") -> "SysElement":
        _same_space(self, other)
        return SysElement(self.system, self.coeffs - other.coeffs)

    def __mul__(self, s: complex) -> "SysElement":
        return SysElement(self.system, self.coeffs * s)

    __rmul__ = __mul__

    def __neg__(self) -> "SysElement":
        return self * (-1.0)


def _same_space(x: SysElement, y: SysElement) -> None:
    if x.system is not y.system or x.coeffs.shape != y.coeffs.shape:
        raise OpsysError("elements live in different spaces")


def element(system: ConcreteOperatorSystem, coeffs) -> SysElement:
    c = np.asarray(coeffs)
    if c.ndim == 1:  # level-1 convenience
        c = c.reshape(-1, 1, 1)
    if c.shape[0] != system.dim or c.shape[1] != c.shape[2]:
        raise OpsysError(f"bad coefficient shape {c.shape} for dim {system.dim}")
    dtype = complex if system.field == "C" else float
    if system.field == "R" and np.iscomplexobj(c) and np.abs(c.imag).max(initial=0.0) > SPAN_TOL:
        raise OpsysError("complex coefficients in a real-field system")
    return SysElement(system, c.astype(dtype))


def ambient(x: SysElement) -> np.ndarray:
    """The representing matrix in M_{nd}: sum_r kron(C_r, b_r)."""
    n, d = x.level, x.system.d
    out = np.zeros((n * d, n * d), dtype=complex if x.system.field == "C" else float)
    for cr, br in zip(x.coeffs, x.system.basis):
        out += np.kron(cr, br)
    return out


def project_to_element(system: ConcreteOperatorSystem, amb: np.ndarray) -> SysElement:
    """Blockwise HS projection of an ambient matrix onto M_n(S)."""
    amb = np.asarray(amb)
    nd = amb.shape[0]
    if amb.shape != (nd, nd) or nd % system.d:
        raise OpsysError(f"ambient shape {amb.shape} incompatible with d={system.d}")
    n, d = nd // system.d, system.d
    coeffs = np.zeros((system.dim, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            block = amb[i * d : (i + 1) * d, j * d : (j + 1) * d]
            coeffs[:, i, j] = system.coords(block)
    return SysElement(system, coeffs if system.field == "C" else coeffs.real)


def from_ambient(system: ConcreteOperatorSystem, amb: np.ndarray, tol: float = 1e-8) -> SysElement:
    """Recover coefficients from an ambient matrix; errors if off the subspace."""
    x = project_to_element(system, amb)
    resid = matcore.frob(ambient(x) - amb)
    if resid > tol * max(1.0, matcore.frob(amb)):
        raise OpsysError(f"matrix is not in M_{x.level}(S) (residual {resid:.2e})")
    return x


def unit(system: ConcreteOperatorSystem, n: int = 1) -> SysElement:
    eye = np.eye(n, dtype=complex if system.field == "C" else float)
    return SysElement(system, np.einsum("r,ij->rij", system.unit_coords, eye))


def adjoint(x: SysElement) -> SysElement:
    """x* in M_n(S); the span is adjoint closed so this is exact."""
    coeffs = np.einsum("rs,rij->sji", x.system.adjoint_mat, x.coeffs.conj())
    return SysElement(x.system, coeffs if x.system.field == "C" else coeffs.real)


def is_selfadjoint(x: SysElement, tol: float = 1e-10) -> bool:
    a = ambient(x)
    return matcore.is_hermitian(a, tol=tol)


def element_tilde(x: SysElement) -> SysElement:
    """[[0, x], [x*, 0]] in M_{2n}(S)."""
    n, m = x.level, x.system.dim
    xs = adjoint(x)
    coeffs = np.zeros((m, 2 * n, 2 * n), dtype=x.coeffs.dtype)
    coeffs[:, :n, n:] = x.coeffs
    coeffs[:, n:, :n] = xs.coeffs
    return SysElement(x.system, coeffs)


def direct_sum(x: SysElement, y: SysElement) -> SysElement:
    if x.system is not y.system:
        raise OpsysError("elements live over different systems")
    n, m, dim = x.level, y.level, x.system.dim
    coeffs = np.zeros((dim, n + m, n + m), dtype=np.promote_types(x.coeffs.dtype, y.coeffs.dtype))
    coeffs[:, :n, :n] = x.coeffs
    coeffs[:, n:, n:] = y.coeffs
    return SysElement(x.system, coeffs if x.system.field == "C" else coeffs.real)


def compress(x: SysElement, alpha: np.ndarray) -> SysElement:
    """alpha* x alpha for a scalar matrix alpha in M_{n,m}."""
    alpha = np.atleast_2d(np.asarray(alpha))
    if alpha.shape[0] != x.level:
        raise OpsysError("compression shape mismatch")
    coeffs = np.einsum("pi,rpq,qj->rij", alpha.conj(), x.coeffs, alpha)
    if x.system.field == "R":
        if np.abs(coeffs.imag).max(initial=0.0) > SPAN_TOL:
            raise OpsysError("complex compression of a real-field element")
        coeffs = coeffs.real
    return SysElement(x.system, coeffs)


def is_positive(x: SysElement, tol: float = matcore.PSD_TOL) -> bool:
    """Membership in the inherited cone M_n(S)+ = M_n(S) with PSD ambient."""
    a = ambient(x)
    if not matcore.is_hermitian(a, tol=1e-10):
        raise OpsysError("positivity asked of a non-selfadjoint element")
    return matcore.is_psd(a, tol=tol)


def order_unit_norm(x: SysElement) -> float:
    """inf{t : -t 1 <= x <= t 1} = spectral norm of the ambient matrix."""
    a = ambient(x)
    if not matcore.is_hermitian(a, tol=1e-10):
        raise OpsysError("order unit norm asked of a non-selfadjoint element")
    w = np.linalg.eigvalsh(matcore.herm(a))
    return float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0


def order_unit_norm_sdp(x: SysElement, tol: float = 1e-8) -> float:
    """Conic cross-check of order_unit_norm: min t with t I +- ambient(x) PSD."""
    from . import conic

    a = ambient(x)
    if not matcore.is_hermitian(a, tol=1e-10):
        raise OpsysError("order unit norm asked of a non-selfadjoint element")
    a = matcore.herm(a)
    nd = a.shape[0]
    p = conic.ConicProblem()
    t = p.new_free(1)
    plus = conic.HermVar(p, nd, x.system.field)   # t I + a
    minus = conic.HermVar(p, nd, x.system.field)  # t I - a
    for i in range(nd):
        for j in range(i, nd):
            ti = conic.expr_entry(p, t, 0) * (1.0 if i == j else 0.0)
            p.add_eq_expr(plus.re(i, j) - ti, a[i, j].real)
            p.add_eq_expr(minus.re(i, j) - ti, -a[i, j].real)
            if x.system.field == "C" and i != j:
                p.add_eq_expr(plus.im(i, j), a[i, j].imag)
                p.add_eq_expr(minus.im(i, j), -a[i, j].imag)
    p.set_objective(conic.expr_entry(p, t, 0))
    sol = conic.solve(p, tol)
    if not sol.optimal:
        raise conic.SolverFailure(f"order unit norm solve ended {sol.status}")
    return sol.objective


def matrix_norm(x: SysElement) -> float:
    """Norm of a general element by the selfadjointization trick at level 2n."""
    return order_unit_norm(element_tilde(x))


def is_state(system: ConcreteOperatorSystem, values: np.ndarray, tol: float = 1e-7) -> bool:
    """Is the functional (given by values on the basis) a state on S?

    Unital within tol and completely positive; positivity is certified by the
    level-1 dual-cone membership test of :mod:`ncbase.cones`.
    """
    from . import cones

    values = np.asarray(values).reshape(-1)
    if values.shape[0] != system.dim:
        raise OpsysError("functional values must match the basis length")
    at_unit = complex(np.dot(system.unit_coords, values))
    if abs(at_unit - 1.0) > tol:
        return False
    phi = cones.DualElement(system, values.reshape(-1, 1, 1).astype(complex))
    return cones.is_member(cones.DualCP(system), phi, tol)[0]


# -- JSON ---------------------------------------------------------------

def system_to_json(system: ConcreteOperatorSystem) -> dict:
    return {
        "field": system.field,
        "ambient_dim": system.d,
        "basis": [matcore.mat_to_json(b, system.field) for b in system.basis],
    }


def system_from_json(obj: dict) -> ConcreteOperatorSystem:
    field = obj["field"]
    mats = [matcore.mat_from_json(m) for m in obj["basis"]]
    sys_ = make_opsys(mats, field=field)
    if sys_.d != int(obj["ambient_dim"]):
        raise OpsysError("ambient_dim disagrees with basis shapes")
    return sys_


def element_to_json(x: SysElement) -> dict:
    return {
        "level": x.level,
        "coeffs": [matcore.mat_to_json(c, x.system.field) for c in x.coeffs],
    }


def element_from_json(system: ConcreteOperatorSystem, obj: dict) -> SysElement:
    coeffs = np.stack([matcore.mat_from_json(m) for m in obj["coeffs"]])
    if coeffs.shape[1] != int(obj["level"]):
        raise OpsysError("level disagrees with coefficient shapes")
    return element(system, coeffs)
