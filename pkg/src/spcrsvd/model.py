"""Datasets, fit configuration, fitted models and the SPCRsvd objective."""

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import DegenerateColumnWarning, DimensionMismatch
from .kernels import as_finite

ALGORITHMS = ("admm", "ladmm")


@dataclass(frozen=True)
class Gram:
    """Sufficient statistics of a dataset for the Gram-space solvers."""

    G: np.ndarray  # X^T X
    Xty: np.ndarray  # X^T y
    col_sums: np.ndarray  # X^T 1
    y_sum: float
    y_sq: float  # y^T y
    n: int
    eigvals: np.ndarray  # of G, ascending
    eigvecs: np.ndarray

    @property
    def trace(self):
        return float(np.trace(self.G))

    @property
    def max_eig(self):
        return float(max(self.eigvals[-1], 0.0))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Preprocessed design matrix and response.

    ``X`` is centred (and optionally scaled) with the stored column
    statistics; ``y`` is kept on its original scale since the intercept
    absorbs its mean. ``raw_X`` keeps the untransformed covariates so that
    cross-validation folds can be re-preprocessed from the exact inputs.
    """

    X: np.ndarray
    y: np.ndarray
    column_means: np.ndarray
    column_scales: np.ndarray
    y_mean: float
    standardized: bool = False
    degenerate_columns: tuple = ()
    raw_X: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def transform(self, X_raw):
        """Apply the stored centring/scaling to new raw covariates."""
        return apply_transform(X_raw, self.column_means, self.column_scales)

    @cached_property
    def gram(self):
        X, y = self.X, self.y
        G = X.T @ X
        G = 0.5 * (G + G.T)
        evals, evecs = scipy.linalg.eigh(G)
        return Gram(
            G=G,
            Xty=X.T @ y,
            col_sums=X.sum(axis=0),
            y_sum=float(y.sum()),
            y_sq=float(y @ y),
            n=X.shape[0],
            eigvals=evals,
            eigvecs=evecs,
        )


def apply_transform(X_raw, means, scales):
    X_raw = as_finite(X_raw, "X", ndim=2)
    if X_raw.shape[1] != means.shape[0]:
        raise DimensionMismatch(f"expected {means.shape[0]} columns, got {X_raw.shape[1]}")
    return (X_raw - means) / scales


def preprocess(raw_X, raw_y, standardize=False):
    """Centre the columns of ``raw_X`` and optionally scale them to unit sd.

    Constant columns are centred to zero, keep scale 1 and trigger a
    :class:`DegenerateColumnWarning`.
    """
    X = as_finite(raw_X, "X", ndim=2)
    y = as_finite(raw_y, "y", ndim=1)
    n, p = X.shape
    if y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows but y has {y.shape[0]} entries")
    if n < 2 or p < 1:
        raise DimensionMismatch(f"need n >= 2 and p >= 1, got n={n}, p={p}")

    means = X.mean(axis=0)
    Xc = X - means
    sd = Xc.std(axis=0, ddof=1)
    degenerate = np.flatnonzero(sd <= 1e-12 * np.maximum(1.0, np.abs(means)))
    if degenerate.size:
        Xc[:, degenerate] = 0.0
        warnings.warn(f"constant covariate columns {degenerate.tolist()} left unscaled",
                      DegenerateColumnWarning, stacklevel=2)
    scales = np.ones(p)
    if standardize:
        scales = np.where(np.isin(np.arange(p), degenerate), 1.0, sd)
        Xc = Xc / scales
    return Dataset(
        X=Xc,
        y=y.copy(),
        column_means=means,
        column_scales=scales,
        y_mean=float(y.mean()),
        standardized=bool(standardize),
        degenerate_columns=tuple(int(j) for j in degenerate),
        raw_X=X.copy(),
    )


@dataclass(frozen=True)
class FitConfig:
    """Tuning, penalty and convergence settings for one SPCRsvd fit.

    For LADMM only ``rho1`` (loading constraint) and ``rho2`` (coefficient
    constraint) are used.
    """

    k: int = 1
    w: float = 0.1
    lambda_V: float = 0.0
    lambda_beta: float = 0.0
    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    max_iter: int = 2000
    tol_abs: float = 1e-5
    tol_rel: float = 1e-4
    algorithm: str = "admm"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        for name in ("w", "lambda_V", "lambda_beta"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("rho1", "rho2", "rho3", "tol_abs", "tol_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")

    def check_dims(self, d):
        if self.k > min(d.n, d.p):
            raise DimensionMismatch(f"k={self.k} exceeds min(n, p)={min(d.n, d.p)}")


@dataclass
class ConvergenceReport:
    """Per-sweep diagnostics of an ADMM/LADMM run.

    ``primal_residuals`` and ``dual_residuals`` have one row per sweep and two
    columns: loading block, coefficient block. ``eps_pri``/``eps_dual`` are the
    thresholds at the final sweep.
    """

    iterations: int
    primal_residuals: np.ndarray
    dual_residuals: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    degenerate_iterates: int = 0
    eps_pri: np.ndarray = field(default_factory=lambda: np.zeros(2))
    eps_dual: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class SpcrsvdModel:
    """A fitted SPCRsvd model.

    ``V`` is the orthonormal loading copy, ``V_sparse`` the soft-thresholded
    copy and ``V_regression`` the copy inside the regression loss (the ADMM
    ``V1`` block, or ``V_sparse`` for LADMM); predictions use the latter.
    """

    intercept: float
    beta: np.ndarray
    V: np.ndarray
    V_sparse: np.ndarray
    Z: np.ndarray
    beta_sparse: np.ndarray
    V_regression: np.ndarray
    diagnostics: ConvergenceReport
    config: FitConfig
    column_means: np.ndarray
    column_scales: np.ndarray

    @property
    def composite_coefficients(self):
        """Per-covariate effects ``V_sparse @ beta_sparse`` (exact zeros kept)."""
        return self.V_sparse @ self.beta_sparse

    @property
    def regression_coefficients(self):
        return self.V_regression @ self.beta


def predict(model, X_new_raw, d=None):
    """Predict responses for raw covariates.

    The centring/scaling of ``d`` is applied when given, otherwise the
    statistics stored on the model.
    """
    if d is not None:
        Xn = d.transform(X_new_raw)
    else:
        Xn = apply_transform(X_new_raw, model.column_means, model.column_scales)
    return model.intercept + Xn @ model.regression_coefficients


def objective(d, intercept, beta, Z, V, cfg):
    """SPCRsvd objective at the point ``(intercept, beta, Z, V)``.

    Sum of the mean squared regression loss on ``X V beta``, the ``w``-weighted
    rank-k reconstruction loss of ``X`` by ``Z V^T`` and the two lasso terms.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    V = np.asarray(V, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, p = d.X.shape
    if V.ndim != 2 or V.shape[0] != p or V.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"V shape {V.shape} incompatible with p={p}, k={beta.shape[0]}")
    if Z.shape != (n, V.shape[1]):
        raise DimensionMismatch(f"Z shape {Z.shape}, expected {(n, V.shape[1])}")
    resid = d.y - intercept - d.X @ (V @ beta)
    recon = d.X - Z @ V.T
    return float(
        resid @ resid / n
        + cfg.w / n * np.sum(recon * recon)
        + cfg.lambda_V * np.abs(V).sum()
        + cfg.lambda_beta * np.abs(beta).sum()
    )
