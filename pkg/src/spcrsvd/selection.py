"""K-fold selection of the two lasso penalties, and evaluation metrics."""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FoldTooSmall, UndefinedRate
from .model import SpcrsvdModel, predict, preprocess
from .solvers import fit


@dataclass
class CvPlan:
    """Fold assignment plus the (lambda_V, lambda_beta) grid.

    ``fold_assignment[i]`` is the held-out fold of observation ``i``.
    """

    K: int
    grid_lambda_V: np.ndarray
    grid_lambda_beta: np.ndarray
    fold_assignment: np.ndarray
    seed: int = 0


@dataclass
class CvResult:
    cv_surface: np.ndarray  # shape (len(grid_lambda_V), len(grid_lambda_beta))
    converged_surface: np.ndarray  # fraction of fold fits that converged
    best_lambda_V: float
    best_lambda_beta: float
    refit_model: SpcrsvdModel
    plan: CvPlan


def assign_folds(n, K, seed=0):
    """Seeded shuffle into ``K`` folds whose sizes differ by at most one."""
    if K < 2 or K > n:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % K
    return folds


def default_grid(d, size=10, low=1e-3, high=1e1):
    """Log-spaced penalties over ``[low, high] * max|X^T y| / n``."""
    scale = float(np.max(np.abs(d.X.T @ (d.y - d.y.mean())))) / d.n
    if scale <= 0:
        scale = 1.0
    return np.geomspace(low * scale, high * scale, size)


def make_plan(d, K=5, grid_lambda_V=None, grid_lambda_beta=None, seed=0, grid_size=10):
    gv = default_grid(d, grid_size) if grid_lambda_V is None else np.asarray(grid_lambda_V, dtype=float)
    gb = default_grid(d, grid_size) if grid_lambda_beta is None else np.asarray(grid_lambda_beta, dtype=float)
    if gv.size == 0 or gb.size == 0:
        raise ValueError("grid must be nonempty")
    if np.any(gv < 0) or np.any(gb < 0):
        raise ValueError("grid values must be nonnegative")
    return CvPlan(K=K, grid_lambda_V=gv, grid_lambda_beta=gb,
                  fold_assignment=assign_folds(d.n, K, seed), seed=seed)


def raw_data(d):
    """Raw covariates and response of a dataset.

    Uses the untransformed copy kept by :func:`preprocess` when present,
    otherwise undoes the stored centring/scaling.
    """
    if d.raw_X is not None:
        return d.raw_X, d.y
    return d.X * d.column_scales + d.column_means, d.y


def fold_datasets(X_raw, y, folds, K, standardize):
    """Yield ``(train_dataset, X_test_processed, y_test)`` per fold, with the
    preprocessing statistics computed on the training part only."""
    for f in range(K):
        test = folds == f
        train = preprocess(X_raw[~test], y[~test], standardize=standardize)
        yield train, train.transform(X_raw[test]), y[test]


def _fold_error(train, X_test, y_test, cfg):
    model = fit(train, cfg)
    resid = y_test - (model.intercept + X_test @ model.regression_coefficients)
    return float(resid @ resid) / y_test.size, model.diagnostics.converged


def cross_validate(d, base_cfg, plan, n_jobs=1, require_converged=True):
    """Grid search of ``(lambda_V, lambda_beta)`` by K-fold CV, then refit.

    The CV value of a grid point is the mean over folds of the held-out mean
    squared prediction error. With ``require_converged``, grid points where
    some fold fit hit ``max_iter`` are only eligible if no grid point had all
    its fold fits converge. Exact ties go to the least shrinkage (smallest
    ``lambda_V``, then smallest ``lambda_beta``).
    """
    if plan.K < 2:
        raise ValueError("K must be >= 2")
    X_raw, y = raw_data(d)
    folds = np.asarray(plan.fold_assignment)
    if folds.shape != (d.n,):
        raise DimensionMismatch("fold assignment length differs from n")
    for f in range(plan.K):
        if np.count_nonzero(folds != f) < base_cfg.k + 1:
            raise FoldTooSmall(f"training part of fold {f} has fewer than k+1={base_cfg.k + 1} rows")
    splits = list(fold_datasets(X_raw, y, folds, plan.K, d.standardized))

    gv, gb = plan.grid_lambda_V, plan.grid_lambda_beta
    tasks = [(i, j, f) for i in range(gv.size) for j in range(gb.size) for f in range(plan.K)]

    def run(task):
        i, j, f = task
        cfg = dataclasses.replace(base_cfg, lambda_V=float(gv[i]), lambda_beta=float(gb[j]))
        train, X_test, y_test = splits[f]
        return _fold_error(train, X_test, y_test, cfg)

    if n_jobs == 1:
        results = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, tasks))
    shape = (gv.size, gb.size, plan.K)
    surface = np.array([r[0] for r in results]).reshape(shape).mean(axis=2)
    conv = np.array([r[1] for r in results], dtype=float).reshape(shape).mean(axis=2)

    eligible = conv == 1.0 if require_converged else np.ones(surface.shape, dtype=bool)
    if not eligible.any():
        eligible[:] = True
    order = sorted(((gv[i], gb[j], i, j) for i in range(gv.size) for j in range(gb.size)))
    best = None
    for _, _, i, j in order:
        if eligible[i, j] and (best is None or surface[i, j] < surface[best]):
            best = (i, j)
    lv, lb = float(gv[best[0]]), float(gb[best[1]])
    refit = fit(d, dataclasses.replace(base_cfg, lambda_V=lv, lambda_beta=lb))
    return CvResult(cv_surface=surface, converged_surface=conv, best_lambda_V=lv, best_lambda_beta=lb,
                    refit_model=refit, plan=plan)


def mse(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(f"shapes {y_true.shape} and {y_pred.shape} differ")
    return float(np.mean((y_true - y_pred) ** 2))


def tpr_tnr(estimated, truth, zero_tol=1e-8, strict=False):
    """Per-replicate true positive and true negative rates of a support estimate.

    Entries with ``|value| <= zero_tol`` count as zero. A rate whose
    denominator set is empty is returned as NaN, or raises
    :class:`UndefinedRate` when ``strict``.
    """
    est = np.abs(np.asarray(estimated, dtype=float)) > zero_tol
    tru = np.asarray(truth, dtype=float) != 0
    if est.shape != tru.shape:
        raise DimensionMismatch(f"shapes {est.shape} and {tru.shape} differ")
    rates = []
    for positive in (True, False):
        denom = np.count_nonzero(tru == positive)
        if denom == 0:
            if strict:
                raise UndefinedRate("no truly {} coefficients".format("nonzero" if positive else "zero"))
            rates.append(float("nan"))
        else:
            rates.append(np.count_nonzero((est == positive) & (tru == positive)) / denom)
    return rates[0], rates[1]


@dataclass(frozen=True)
class SelectionMetrics:
    mse: float
    tpr: float = float("nan")
    tnr: float = float("nan")


def evaluate(model, X_test_raw, y_test, truth=None):
    """Test MSE of a fitted model and, when ``truth`` is given, TPR/TNR of its
    composite coefficients."""
    tpr = tnr = float("nan")
    if truth is not None:
        tpr, tnr = tpr_tnr(model.composite_coefficients, truth)
    return SelectionMetrics(mse(y_test, predict(model, X_test_raw)), tpr, tnr)
