"""Dense real/complex matrix kernel.

All matrices are numpy arrays; complex Hermitian work uses the native LAPACK
kernels via ``numpy.linalg``.  Conventions used across the package:

* A matrix is "Hermitian" when it equals its conjugate transpose to 1e-12;
  constructors symmetrize rather than reject.
* Rank/support decisions use a relative cutoff ``tol * ||a||``.
* Kronecker layout: an element of ``M_m (x) M_n`` has row index ``i*n + j``
  with ``i`` the outer (M_m) index.
"""

from __future__ import annotations

import numpy as np

# Tolerance ladder: construction symmetrization, PSD decisions, rank cutoffs.
SYM_TOL = 1e-12
PSD_TOL = 1e-9
RANK_TOL = 1e-9


class MatcoreError(ValueError):
    """Raised on contract violations (non-square, non-Hermitian, not PSD...)."""


def herm(a: np.ndarray) -> np.ndarray:
    """Hermitian part (a + a*)/2."""
    a = np.asarray(a)
    return (a + a.conj().T) / 2


def is_hermitian(a: np.ndarray, tol: float = SYM_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= tol * scale)


def _require_hermitian(a: np.ndarray, what: str = "input") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatcoreError(f"{what} must be square, got shape {a.shape}")
    if not is_hermitian(a, tol=1e-10):
        raise MatcoreError(f"{what} is not Hermitian")
    return herm(a)


def herm_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, unitary eigenvector matrix V) with
    a = V diag(w) V*.  Raises on non-square or non-Hermitian input.
    """
    a = _require_hermitian(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # iteration failure: abort, no fallback
        raise MatcoreError(f"eigendecomposition did not converge: {exc}") from exc
    return w, v


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def min_eig(a: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    a = _require_hermitian(a)
    return float(np.linalg.eigvalsh(a)[0])


def is_psd(a: np.ndarray, tol: float = PSD_TOL) -> bool:
    """True iff the Hermitian matrix a has min eigenvalue >= -tol."""
    if tol < 0:
        raise MatcoreError("tol must be nonnegative")
    if a.size == 0:
        return True
    return min_eig(a) >= -tol


def support_projection(a: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projection onto the range of a PSD matrix.

    Eigenvectors with eigenvalue > tol * ||a|| span the range; the zero
    matrix maps to the zero projection.
    """
    w, v = herm_eig(a)
    scale = float(max(np.abs(w), default=0.0)) if w.size else 0.0
    if w.size and w[0] < -max(PSD_TOL, tol * max(1.0, scale)):
        raise MatcoreError("support_projection requires a PSD input")
    if scale == 0.0:
        return np.zeros_like(np.asarray(a))
    keep = w > tol * scale
    vk = v[:, keep]
    return herm(vk @ vk.conj().T)


def restricted_inv_sqrt(a: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Inverse square root on the support of a PSD matrix, identity off it.

    Returns m = (e a e)^(-1/2) + e_perp where e is the support projection,
    so that m a m equals e.  For the zero matrix this is the identity.
    """
    w, v = herm_eig(a)
    scale = float(max(np.abs(w), default=0.0)) if w.size else 0.0
    if w.size and w[0] < -max(PSD_TOL, tol * max(1.0, scale)):
        raise MatcoreError("restricted_inv_sqrt requires a PSD input")
    d = np.ones_like(w)
    if scale > 0.0:
        keep = w > tol * scale
        d[keep] = 1.0 / np.sqrt(w[keep])
    return herm((v * d) @ v.conj().T)


def tilde(x: np.ndarray) -> np.ndarray:
    """Selfadjointization [[0, x], [x*, 0]]; rectangular x is allowed."""
    x = np.atleast_2d(np.asarray(x))
    r, c = x.shape
    out = np.zeros((r + c, r + c), dtype=np.promote_types(x.dtype, float))
    out[:r, r:] = x
    out[r:, :r] = x.conj().T
    return out


def shuffle_permutation(m: int, n: int) -> np.ndarray:
    """Index permutation sending M_m (x) M_n row i*n + j to M_n (x) M_m row j*m + i."""
    idx = np.arange(m * n).reshape(m, n).T.reshape(-1)
    return idx


def canonical_shuffle(x: np.ndarray, m: int, n: int) -> np.ndarray:
    """Reindex an element of M_m (x) M_n as the same element of M_n (x) M_m.

    A permutation similarity; applying the (n, m) shuffle to the result gives
    back x.  Eigenvalues and PSD-ness are preserved.
    """
    x = np.asarray(x)
    if x.shape != (m * n, m * n):
        raise MatcoreError(f"expected a {m * n}x{m * n} matrix, got {x.shape}")
    p = shuffle_permutation(m, n)
    return x[np.ix_(p, p)]


# ---------------------------------------------------------------------------
# JSON encoding: {"rows": n, "cols": m, "field": "R"|"C", "data": [[...]]},
# complex entries as [re, im] pairs, real entries bare numbers, row-major.
# ---------------------------------------------------------------------------

def mat_to_json(a: np.ndarray, field: str | None = None) -> dict:
    a = np.atleast_2d(np.asarray(a))
    if field is None:
        field = "C" if np.iscomplexobj(a) else "R"
    if field == "R":
        if np.iscomplexobj(a):
            if np.abs(a.imag).max(initial=0.0) > SYM_TOL:
                raise MatcoreError("matrix has imaginary entries but field is R")
            a = a.real
        data = [[float(v) for v in row] for row in a]
    elif field == "C":
        a = a.astype(complex)
        data = [[[float(v.real), float(v.imag)] for v in row] for row in a]
    else:
        raise MatcoreError(f"unknown field tag {field!r}")
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "field": field, "data": data}


def mat_from_json(obj: dict) -> np.ndarray:
    field = obj.get("field", "R")
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = obj["data"]
    if len(data) != rows or any(len(r) != cols for r in data):
        raise MatcoreError("data shape disagrees with rows/cols")
    if field == "R":
        a = np.array(data, dtype=float)
    elif field == "C":
        a = np.array([[complex(v[0], v[1]) for v in row] for row in data])
    else:
        raise MatcoreError(f"unknown field tag {field!r}")
    return a
