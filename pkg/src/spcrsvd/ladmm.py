"""Linearized ADMM solver for SPCRsvd.

Only two loading copies are kept: the orthonormal ``V`` and the sparse
``V0``, which also sits inside the regression loss. The coupled ``V0``
subproblem is replaced by one proximal-gradient step on a quadratic
majoriser of the regression loss whose curvature ``nu`` is the largest
eigenvalue of ``beta beta^T kron X^T X``.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import _backend
from .admm import coef_step, leading_loadings, update_intercept
from .errors import RankDeficient
from .kernels import procrustes_orthogonalize, soft_threshold
from .model import ConvergenceReport, SpcrsvdModel

#: Lower bound on the linearization constant (reached when beta = 0).
NU_FLOOR = 1e-8


@dataclass
class LadmmState:
    V: np.ndarray
    V0: np.ndarray
    Z: np.ndarray
    beta: np.ndarray
    beta0_vec: np.ndarray
    intercept: float
    Lambda: np.ndarray
    lambda_vec: np.ndarray
    nu: float = NU_FLOOR
    iter: int = 0

    def copy(self):
        skip = ("intercept", "iter", "nu")
        return dataclasses.replace(
            self, **{f.name: np.copy(getattr(self, f.name))
                     for f in dataclasses.fields(self) if f.name not in skip}
        )


def initialize(d, cfg):
    cfg.check_dims(d)
    V = leading_loadings(d.X, cfg.k)
    k = cfg.k
    return LadmmState(
        V=V, V0=V.copy(), Z=d.X @ V, beta=np.zeros(k), beta0_vec=np.zeros(k),
        intercept=float(d.y.mean()), Lambda=np.zeros_like(V), lambda_vec=np.zeros(k),
    )


def compute_nu(beta, d):
    """``|beta|^2 * sigma_max(X)^2``, floored at :data:`NU_FLOOR`."""
    beta = np.asarray(beta, dtype=float)
    return max(float(beta @ beta) * d.gram.max_eig, NU_FLOOR)


def update_V_ladmm(s, d, cfg):
    M = (cfg.w / d.n) * (d.X.T @ s.Z) + 0.5 * cfg.rho1 * (s.V0 + s.Lambda)
    return procrustes_orthogonalize(M)


def ladmm_step_matrix(s, d, cfg, nu):
    """Gradient-step point of the linearized V0 subproblem (before shrinkage)."""
    g = d.gram
    n = g.n
    bbT = np.outer(s.beta, s.beta)
    inner = ((np.outer(g.Xty - s.intercept * g.col_sums, s.beta) - g.G @ s.V0 @ bbT) / n
             + (nu / n) * s.V0 - 0.5 * cfg.rho1 * (s.Lambda - s.V))
    return (2.0 * n / (2.0 * nu + n * cfg.rho1)) * inner


def update_V0_ladmm(s, d, cfg, nu=None):
    """Soft-thresholded linearized step for the sparse loading copy."""
    nu = compute_nu(s.beta, d) if nu is None else nu
    n = d.n
    return soft_threshold(ladmm_step_matrix(s, d, cfg, nu), n * cfg.lambda_V / (2.0 * nu + n * cfg.rho1))


def surrogate(V0, s, d, cfg, nu):
    """Linearized objective of the V0 subproblem, expanded around ``s.V0``.

    Includes the constant terms so that it equals the exact subproblem
    objective at the expansion point.
    """
    n = d.n
    ystar = d.y - s.intercept
    Vt = s.V0
    r0 = ystar - d.X @ (Vt @ s.beta)
    grad = -2.0 * np.outer(d.X.T @ r0, s.beta)
    dV = V0 - Vt
    return float((r0 @ r0 + np.sum(grad * dV) + nu * np.sum(dV * dV)) / n
                 + 0.5 * cfg.rho1 * np.sum((V0 - s.V + s.Lambda) ** 2)
                 + cfg.lambda_V * np.abs(V0).sum())


def update_duals(s):
    return s.Lambda + (s.V0 - s.V), s.lambda_vec + (s.beta - s.beta0_vec)


def sweep(s, d, cfg):
    """One LADMM sweep. Returns ``(new_state, degenerate)``."""
    s = s.copy()
    degenerate = False
    try:
        s.V = update_V_ladmm(s, d, cfg)
    except RankDeficient:
        degenerate = True
    s.nu = compute_nu(s.beta, d)
    s.V0 = update_V0_ladmm(s, d, cfg, s.nu)
    s.Z = d.X @ s.V
    s.beta = coef_step(d.gram, s.V0, s.intercept, s.beta0_vec, s.lambda_vec, cfg.rho2)
    s.beta0_vec = soft_threshold(s.beta + s.lambda_vec, cfg.lambda_beta / cfg.rho2)
    s.intercept = update_intercept(s, d, s.V0)
    s.Lambda, s.lambda_vec = update_duals(s)
    s.iter += 1
    return s, degenerate


def residuals(s, prev_V0, prev_beta0, cfg):
    pk = s.V.size
    k = s.beta.size
    r = np.array([np.linalg.norm(s.V0 - s.V), np.linalg.norm(s.beta - s.beta0_vec)])
    dual = np.array([cfg.rho1 * np.linalg.norm(s.V0 - prev_V0),
                     cfg.rho2 * np.linalg.norm(s.beta0_vec - prev_beta0)])
    eps_pri = np.array([
        np.sqrt(pk) * cfg.tol_abs + cfg.tol_rel * max(np.linalg.norm(s.V), np.linalg.norm(s.V0)),
        np.sqrt(k) * cfg.tol_abs + cfg.tol_rel * max(np.linalg.norm(s.beta), np.linalg.norm(s.beta0_vec)),
    ])
    eps_dual = np.array([
        np.sqrt(pk) * cfg.tol_abs + cfg.tol_rel * cfg.rho1 * np.linalg.norm(s.Lambda),
        np.sqrt(k) * cfg.tol_abs + cfg.tol_rel * cfg.rho2 * np.linalg.norm(s.lambda_vec),
    ])
    return r, dual, eps_pri, eps_dual


def split_objective(s, d, cfg):
    resid = d.y - s.intercept - d.X @ (s.V0 @ s.beta)
    recon = d.X - s.Z @ s.V.T
    return float(resid @ resid / d.n + cfg.w / d.n * np.sum(recon * recon)
                 + cfg.lambda_V * np.abs(s.V0).sum() + cfg.lambda_beta * np.abs(s.beta0_vec).sum())


def run_python(s, d, cfg):
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


def solve_ladmm(d, cfg, state=None, backend=None):
    s = initialize(d, cfg) if state is None else state.copy()
    if _backend.resolve(backend) == "compiled":
        return _backend.run_ladmm_compiled(s, d, cfg)
    return run_python(s, d, cfg)


def fit_ladmm(d, cfg, backend=None):
    """Fit SPCRsvd by linearized ADMM; predictions use the sparse copy."""
    if cfg.algorithm != "ladmm":
        cfg = dataclasses.replace(cfg, algorithm="ladmm")
    s, report = solve_ladmm(d, cfg, backend=backend)
    return SpcrsvdModel(
        intercept=s.intercept, beta=s.beta.copy(), V=s.V.copy(), V_sparse=s.V0.copy(),
        Z=s.Z.copy(), beta_sparse=s.beta0_vec.copy(), V_regression=s.V0.copy(),
        diagnostics=report, config=cfg,
        column_means=d.column_means.copy(), column_scales=d.column_scales.copy(),
    )
