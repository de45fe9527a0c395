"""Two-stage reference methods: principal component regression and PLS1."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficient, ZeroCovariance
from .kernels import RANK_TOL, thin_svd
from .model import apply_transform
from .selection import assign_folds, fold_datasets, raw_data

KINDS = ("pcr", "pls")


@dataclass
class BaselineModel:
    kind: str
    k: int
    intercept: float
    coefficients: np.ndarray
    column_means: np.ndarray
    column_scales: np.ndarray

    @property
    def composite_coefficients(self):
        return self.coefficients

    def predict(self, X_new_raw):
        Xn = apply_transform(X_new_raw, self.column_means, self.column_scales)
        return self.intercept + Xn @ self.coefficients


def _intercept(d, coef):
    return float(np.mean(d.y - d.X @ coef))


def fit_pcr(d, k):
    """Least squares of ``y`` on the top-``k`` principal component scores,
    mapped back to coefficients on the covariates."""
    _, s, Vt = thin_svd(d.X)
    if k < 1 or k > s.size or s[k - 1] <= RANK_TOL * max(1.0, s[0]):
        raise RankDeficient(f"k={k} exceeds the rank of X")
    W = Vt[:k].T
    T = d.X @ W
    yc = d.y - d.y.mean()
    gamma = np.linalg.lstsq(T, yc, rcond=None)[0]
    coef = W @ gamma
    return BaselineModel("pcr", k, _intercept(d, coef), coef, d.column_means.copy(), d.column_scales.copy())


def fit_pls(d, k):
    """PLS1 by NIPALS with X deflation.

    Stops early with a :class:`ZeroCovariance` warning when the deflated
    covariates no longer covary with the response.
    """
    X = d.X.copy()
    yc = d.y - d.y.mean()
    p = X.shape[1]
    if k < 1 or k > min(X.shape[0] - 1, p):
        raise RankDeficient(f"k={k} outside 1..min(n-1, p)")
    scale = max(1.0, float(np.linalg.norm(d.X.T @ yc)))
    Ws, Ps, qs = [], [], []
    for a in range(k):
        w = X.T @ yc
        nw = np.linalg.norm(w)
        if nw <= 1e-12 * scale:
            warnings.warn(f"PLS stopped after {a} of {k} components: zero covariance",
                          ZeroCovariance, stacklevel=2)
            break
        w = w / nw
        t = X @ w
        tt = t @ t
        load = X.T @ t / tt
        Ws.append(w)
        Ps.append(load)
        qs.append(yc @ t / tt)
        X = X - np.outer(t, load)
    if not Ws:
        coef = np.zeros(p)
    else:
        W = np.column_stack(Ws)
        P = np.column_stack(Ps)
        coef = W @ np.linalg.solve(P.T @ W, np.array(qs))
    return BaselineModel("pls", len(Ws), _intercept(d, coef), coef,
                         d.column_means.copy(), d.column_scales.copy())


def fit_baseline(d, kind, k):
    if kind == "pcr":
        return fit_pcr(d, k)
    if kind == "pls":
        return fit_pls(d, k)
    raise ValueError(f"unknown baseline {kind!r}")


def select_components(d, kind, k_max, folds=10, seed=0):
    """Pick the component count in ``1..k_max`` by K-fold CV and refit.

    Returns ``(model, cv_errors)``; ties go to fewer components.
    """
    k_max = min(k_max, d.p, d.n - d.n // folds - 1)
    X_raw, y = raw_data(d)
    assignment = assign_folds(d.n, folds, seed)
    errors = np.zeros(k_max)
    for train, X_test, y_test in fold_datasets(X_raw, y, assignment, folds, d.standardized):
        for k in range(1, k_max + 1):
            m = fit_baseline(train, kind, k)
            resid = y_test - (m.intercept + X_test @ m.coefficients)
            errors[k - 1] += float(resid @ resid) / y_test.size
    errors /= folds
    best = int(np.argmin(errors)) + 1
    return fit_baseline(d, kind, best), errors
