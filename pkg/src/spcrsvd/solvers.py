"""Algorithm dispatch."""

from .admm import fit_admm
from .ladmm import fit_ladmm


def fit(d, cfg, backend=None):
    """Fit SPCRsvd with the algorithm named in ``cfg``."""
    if cfg.algorithm == "ladmm":
        return fit_ladmm(d, cfg, backend=backend)
    return fit_admm(d, cfg, backend=backend)
