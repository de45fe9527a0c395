"""Sparse principal component regression with an SVD-type PCA loss.

Joint estimation of loadings and regression coefficients by ADMM or
linearized ADMM, with cross-validated lasso penalties, PCR/PLS baselines and
a Monte Carlo benchmark harness.
"""

from ._backend import HAVE_COMPILED
from .admm import fit_admm
from .ladmm import fit_ladmm
from .model import Dataset, FitConfig, SpcrsvdModel, objective, predict, preprocess
from .solvers import fit

__all__ = [
    "HAVE_COMPILED", "Dataset", "FitConfig", "SpcrsvdModel",
    "fit", "fit_admm", "fit_ladmm", "objective", "predict", "preprocess",
]
__version__ = "0.1.0"
