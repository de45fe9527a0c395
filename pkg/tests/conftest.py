import numpy as np
import pytest

from spcrsvd import HAVE_COMPILED, preprocess

BACKENDS = ["python"] + (["compiled"] if HAVE_COMPILED else [])


def make_data(n=40, p=6, seed=0, coef=None, noise=1.0, standardize=False):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if coef is None:
        coef = np.zeros(p)
        coef[:2] = (2.0, 1.0)
    y = X @ np.asarray(coef, dtype=float) + noise * rng.standard_normal(n)
    return preprocess(X, y, standardize=standardize)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def data():
    return make_data()
