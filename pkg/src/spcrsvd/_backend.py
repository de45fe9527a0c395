"""Selects the sweep-loop implementation at import time.

The compiled extension ``spcrsvd._core`` runs the whole ADMM/LADMM loop in
Gram space. When it is missing (source checkout without a build), or when
``SPCRSVD_BACKEND=python`` is set, the pure-Python loops in
:mod:`spcrsvd.admm` / :mod:`spcrsvd.ladmm` are used instead.
"""

import os

import numpy as np

from .model import ConvergenceReport

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None

HAVE_COMPILED = _core is not None
DEFAULT = "compiled" if HAVE_COMPILED and os.environ.get("SPCRSVD_BACKEND", "") != "python" else "python"


def resolve(backend=None):
    backend = DEFAULT if backend is None else backend
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled backend requested but spcrsvd._core is not built")
    return backend


def _params(cfg):
    return np.array([cfg.w, cfg.lambda_V, cfg.lambda_beta, cfg.rho1, cfg.rho2, cfg.rho3,
                     cfg.tol_abs, cfg.tol_rel], dtype=float)


def _report(out, degenerate, converged):
    it = out["iterations"]
    return ConvergenceReport(
        iterations=it,
        primal_residuals=out["primal"][:it].copy(),
        dual_residuals=out["dual"][:it].copy(),
        objective_trace=out["objective"][:it].copy(),
        converged=bool(converged),
        degenerate_iterates=int(degenerate),
        eps_pri=out["eps_pri"].copy(),
        eps_dual=out["eps_dual"].copy(),
    )


def _c(a):
    return np.ascontiguousarray(a, dtype=float).copy()


def run_admm_compiled(s, d, cfg):
    g = d.gram
    V, V0, V1 = _c(s.V), _c(s.V0), _c(s.V1)
    beta, beta0, L1, L2, l3 = _c(s.beta), _c(s.beta0_vec), _c(s.Lambda1), _c(s.Lambda2), _c(s.lambda3)
    # Z enters only through X^T Z; carry it as the Gram product.
    XtZ = _c(d.X.T @ s.Z)
    out = _core.admm_loop(
        _c(g.G), _c(g.eigvecs), _c(g.eigvals), _c(g.Xty), _c(g.col_sums),
        g.y_sum, g.y_sq, g.n, V, V0, V1, XtZ, beta, beta0, L1, L2, l3,
        float(s.intercept), _params(cfg), int(cfg.max_iter),
    )
    s = s.copy()
    s.V, s.V0, s.V1, s.beta, s.beta0_vec = V, V0, V1, beta, beta0
    s.Lambda1, s.Lambda2, s.lambda3 = L1, L2, l3
    s.intercept = out["intercept"]
    s.Z = d.X @ V
    s.iter += out["iterations"]
    return s, _report(out, out["degenerate"], out["converged"])


def run_ladmm_compiled(s, d, cfg):
    g = d.gram
    V, V0 = _c(s.V), _c(s.V0)
    beta, beta0, L, lv = _c(s.beta), _c(s.beta0_vec), _c(s.Lambda), _c(s.lambda_vec)
    XtZ = _c(d.X.T @ s.Z)
    out = _core.ladmm_loop(
        _c(g.G), g.max_eig, _c(g.Xty), _c(g.col_sums), g.y_sum, g.y_sq, g.n,
        V, V0, XtZ, beta, beta0, L, lv, float(s.intercept), _params(cfg), int(cfg.max_iter),
    )
    s = s.copy()
    s.V, s.V0, s.beta, s.beta0_vec, s.Lambda, s.lambda_vec = V, V0, beta, beta0, L, lv
    s.intercept = out["intercept"]
    s.nu = out["nu"]
    s.Z = d.X @ V
    s.iter += out["iterations"]
    return s, _report(out, out["degenerate"], out["converged"])
