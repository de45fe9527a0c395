"""Dense linear-algebra and proximal primitives shared by both solvers.

All functions are pure and operate on float64 numpy arrays.
"""

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite, RankDeficient

#: Singular values below this are treated as zero for rank decisions.
RANK_TOL = 1e-12


def as_finite(a, name="array", ndim=None):
    """Return ``a`` as a float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def soft_threshold(x, lam):
    """Elementwise ``sign(x) * max(|x| - lam, 0)``.

    Works on scalars and arrays; ``lam`` must be nonnegative.
    """
    if np.any(np.asarray(lam) < 0):
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def thin_svd(M):
    """Thin SVD ``M = U @ diag(s) @ Vt`` with a deterministic sign convention.

    Each left singular vector is flipped (together with its right partner) so
    that its largest-magnitude entry is positive.
    """
    M = as_finite(M, "M", ndim=2)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if U.shape[1]:
        idx = np.argmax(np.abs(U), axis=0)
        signs = np.sign(U[idx, np.arange(U.shape[1])])
        signs[signs == 0] = 1.0
        U = U * signs
        Vt = Vt * signs[:, None]
    return U, s, Vt


def procrustes_orthogonalize(M):
    """Nearest orthonormal-column matrix to ``M``.

    Returns ``P @ Q.T`` where ``M = P @ diag(omega) @ Q.T`` is the thin SVD,
    i.e. the maximiser of ``trace(V.T @ M)`` over ``V.T @ V = I``.

    Raises
    ------
    RankDeficient
        If ``M`` has fewer rows than columns or a singular value below
        :data:`RANK_TOL`; the rotation is not unique then.
    """
    M = as_finite(M, "M", ndim=2)
    p, k = M.shape
    if p < k:
        raise RankDeficient(f"need p >= k, got {p}x{k}")
    P, omega, Qt = thin_svd(M)
    if omega.size and omega[-1] < RANK_TOL:
        raise RankDeficient(f"smallest singular value {omega[-1]:.3e} below {RANK_TOL}")
    return P @ Qt


def solve_spd(A, B):
    """Solve ``A X = B`` for symmetric positive definite ``A`` via Cholesky."""
    A = as_finite(A, "A", ndim=2)
    B = as_finite(B, "B")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return scipy.linalg.cho_solve(factor, B, check_finite=False)


def max_eigenvalue_sym(A):
    """Largest eigenvalue of a symmetric matrix."""
    A = as_finite(A, "A", ndim=2)
    if A.shape[0] == 0:
        raise ValueError("empty matrix")
    return float(scipy.linalg.eigvalsh(A, subset_by_index=[A.shape[0] - 1, A.shape[0] - 1])[0])
