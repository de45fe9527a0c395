"""ADMM solver for SPCRsvd.

The problem is split with three loading copies (``V`` orthonormal, ``V0``
sparse, ``V1`` inside the regression loss) and two coefficient copies
(``beta`` and the sparse ``beta0_vec``), tied by scaled duals ``Lambda1``,
``Lambda2`` and ``lambda3``. One sweep updates, in order, V1, V, V0, Z, beta,
beta0_vec, the intercept and the duals.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import RankDeficient
from .kernels import RANK_TOL, procrustes_orthogonalize, soft_threshold, thin_svd
from .model import ConvergenceReport, SpcrsvdModel


@dataclass
class AdmmState:
    V: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    Z: np.ndarray
    beta: np.ndarray
    beta0_vec: np.ndarray
    intercept: float
    Lambda1: np.ndarray
    Lambda2: np.ndarray
    lambda3: np.ndarray
    iter: int = 0

    def copy(self):
        return dataclasses.replace(
            self, **{f.name: np.copy(getattr(self, f.name))
                     for f in dataclasses.fields(self) if f.name not in ("intercept", "iter")}
        )


def leading_loadings(X, k):
    """Top-``k`` right singular vectors of ``X`` as a p x k matrix."""
    _, s, Vt = thin_svd(X)
    if s.size < k or s[k - 1] <= RANK_TOL * max(1.0, s[0]):
        raise RankDeficient(f"X has fewer than k={k} nonzero singular values")
    return Vt[:k].T.copy()


def initialize(d, cfg):
    """SVD warm start: all loading copies at the top-k right singular
    vectors, zero coefficients and duals, intercept at the response mean."""
    cfg.check_dims(d)
    V = leading_loadings(d.X, cfg.k)
    k = cfg.k
    return AdmmState(
        V=V, V0=V.copy(), V1=V.copy(), Z=d.X @ V,
        beta=np.zeros(k), beta0_vec=np.zeros(k), intercept=float(d.y.mean()),
        Lambda1=np.zeros_like(V), Lambda2=np.zeros_like(V), lambda3=np.zeros(k),
    )


def solve_kron_system(gram, beta, R, rho):
    """Solve ``(1/n) G V b b^T + (rho/2) V = R`` for ``V`` without forming
    the Kronecker product.

    Splits ``V`` along ``u = b/|b|`` and its orthogonal complement: the
    complement part is ``R (I - u u^T) * 2/rho`` and the ``u`` part solves a
    p x p system diagonalised by the eigenvectors of ``G``.
    """
    b2 = float(beta @ beta)
    if b2 == 0.0:
        return (2.0 / rho) * R
    u = beta / np.sqrt(b2)
    Ru = R @ u
    Q = gram.eigvecs
    a = Q @ ((Q.T @ Ru) / (b2 * gram.eigvals / gram.n + 0.5 * rho))
    return (2.0 / rho) * (R - np.outer(Ru, u)) + np.outer(a, u)


def update_V1(s, d, cfg):
    """Exact minimiser over V1 of the regression loss plus the V1-V0 penalty."""
    g = d.gram
    R = np.outer(g.Xty - s.intercept * g.col_sums, s.beta) / g.n + 0.5 * cfg.rho2 * (s.V0 - s.Lambda2)
    return solve_kron_system(g, s.beta, R, cfg.rho2)


def update_V(s, d, cfg):
    """Procrustes step for the orthonormal copy; may raise RankDeficient."""
    M = (cfg.w / d.n) * (d.X.T @ s.Z) + 0.5 * cfg.rho1 * (s.V0 - s.Lambda1)
    return procrustes_orthogonalize(M)


def update_V0(s, cfg):
    blend = (cfg.rho1 * (s.V + s.Lambda1) + cfg.rho2 * (s.V1 + s.Lambda2)) / (cfg.rho1 + cfg.rho2)
    return soft_threshold(blend, cfg.lambda_V / (cfg.rho1 + cfg.rho2))


def update_Z(s, d):
    return d.X @ s.V


def coef_step(gram, V_reg, intercept, beta_sparse, dual, rho):
    """Minimiser over beta of the regression loss on ``X V_reg beta`` plus
    ``(rho/2)|beta - beta_sparse + dual|^2``."""
    k = V_reg.shape[1]
    A = V_reg.T @ (gram.G @ V_reg) / gram.n + 0.5 * rho * np.eye(k)
    rhs = V_reg.T @ (gram.Xty - intercept * gram.col_sums) / gram.n + 0.5 * rho * (beta_sparse - dual)
    return np.linalg.solve(A, rhs)


def update_beta(s, d, cfg):
    return coef_step(d.gram, s.V1, s.intercept, s.beta0_vec, s.lambda3, cfg.rho3)


def update_beta0_vec(s, cfg):
    return soft_threshold(s.beta + s.lambda3, cfg.lambda_beta / cfg.rho3)


def update_intercept(s, d, V_reg=None):
    """Mean of ``y - X V_reg beta``; ``V_reg`` defaults to ``s.V1``."""
    V_reg = s.V1 if V_reg is None else V_reg
    return float(np.mean(d.y - d.X @ (V_reg @ s.beta)))


def update_duals(s):
    return (s.Lambda1 + (s.V - s.V0),
            s.Lambda2 + (s.V1 - s.V0),
            s.lambda3 + (s.beta - s.beta0_vec))


def sweep(s, d, cfg):
    """One full ADMM sweep. Returns ``(new_state, degenerate)``."""
    s = s.copy()
    degenerate = False
    s.V1 = update_V1(s, d, cfg)
    try:
        s.V = update_V(s, d, cfg)
    except RankDeficient:
        degenerate = True
    s.V0 = update_V0(s, cfg)
    s.Z = update_Z(s, d)
    s.beta = update_beta(s, d, cfg)
    s.beta0_vec = update_beta0_vec(s, cfg)
    s.intercept = update_intercept(s, d)
    s.Lambda1, s.Lambda2, s.lambda3 = update_duals(s)
    s.iter += 1
    return s, degenerate


def residuals(s, prev_V0, prev_beta0, cfg):
    """Primal/dual residuals and their thresholds, per block (loading, coef)."""
    pk = s.V.size
    k = s.beta.size
    r = np.array([max(np.linalg.norm(s.V - s.V0), np.linalg.norm(s.V1 - s.V0)),
                  np.linalg.norm(s.beta - s.beta0_vec)])
    dual = np.array([np.hypot(cfg.rho1, cfg.rho2) * np.linalg.norm(s.V0 - prev_V0),
                     cfg.rho3 * np.linalg.norm(s.beta0_vec - prev_beta0)])
    eps_pri = np.array([
        np.sqrt(pk) * cfg.tol_abs + cfg.tol_rel * max(np.linalg.norm(s.V), np.linalg.norm(s.V0),
                                                      np.linalg.norm(s.V1)),
        np.sqrt(k) * cfg.tol_abs + cfg.tol_rel * max(np.linalg.norm(s.beta), np.linalg.norm(s.beta0_vec)),
    ])
    eps_dual = np.array([
        np.sqrt(pk) * cfg.tol_abs + cfg.tol_rel * np.hypot(cfg.rho1 * np.linalg.norm(s.Lambda1),
                                                           cfg.rho2 * np.linalg.norm(s.Lambda2)),
        np.sqrt(k) * cfg.tol_abs + cfg.tol_rel * cfg.rho3 * np.linalg.norm(s.lambda3),
    ])
    return r, dual, eps_pri, eps_dual


def split_objective(s, d, cfg):
    """Objective of the split problem at the current iterate."""
    resid = d.y - s.intercept - d.X @ (s.V1 @ s.beta)
    recon = d.X - s.Z @ s.V.T
    return float(resid @ resid / d.n + cfg.w / d.n * np.sum(recon * recon)
                 + cfg.lambda_V * np.abs(s.V0).sum() + cfg.lambda_beta * np.abs(s.beta0_vec).sum())


def run_python(s, d, cfg):
    """Reference sweep loop built from the per-block updates."""
    pri, dua, obj = [], [], []
    degenerate = 0
    converged = False
    eps_pri = eps_dual = np.zeros(2)
    for _ in range(cfg.max_iter):
        prev_V0, prev_b0 = s.V0, s.beta0_vec
        s, deg = sweep(s, d, cfg)
        degenerate += deg
        r, dual, eps_pri, eps_dual = residuals(s, prev_V0, prev_b0, cfg)
        pri.append(r)
        dua.append(dual)
        obj.append(split_objective(s, d, cfg))
        if np.all(r <= eps_pri) and np.all(dual <= eps_dual):
            converged = True
            break
    report = ConvergenceReport(
        iterations=s.iter, primal_residuals=np.array(pri).reshape(-1, 2),
        dual_residuals=np.array(dua).reshape(-1, 2), objective_trace=np.array(obj),
        converged=converged, degenerate_iterates=degenerate, eps_pri=eps_pri, eps_dual=eps_dual,
    )
    return s, report


def solve_admm(d, cfg, state=None, backend=None):
    """Run ADMM from ``state`` (default: :func:`initialize`).

    Returns the final state and its :class:`ConvergenceReport`.
    """
    s = initialize(d, cfg) if state is None else state.copy()
    if _backend.resolve(backend) == "compiled":
        return _backend.run_admm_compiled(s, d, cfg)
    return run_python(s, d, cfg)


def fit_admm(d, cfg, backend=None):
    """Fit SPCRsvd by ADMM and assemble the model."""
    if cfg.algorithm != "admm":
        cfg = dataclasses.replace(cfg, algorithm="admm")
    s, report = solve_admm(d, cfg, backend=backend)
    return SpcrsvdModel(
        intercept=s.intercept, beta=s.beta.copy(), V=s.V.copy(), V_sparse=s.V0.copy(),
        Z=s.Z.copy(), beta_sparse=s.beta0_vec.copy(), V_regression=s.V1.copy(),
        diagnostics=report, config=cfg,
        column_means=d.column_means.copy(), column_scales=d.column_scales.copy(),
    )
