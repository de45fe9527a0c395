import dataclasses
import warnings

import numpy as np
import pytest

from conftest import make_data
from oracles import objective_terms
from spcrsvd import FitConfig, fit, objective, predict, preprocess
from spcrsvd.errors import DegenerateColumnWarning, DimensionMismatch


def test_preprocess_center_only():
    d = preprocess(np.array([[1.0], [2.0], [3.0]]), np.zeros(3))
    np.testing.assert_allclose(d.X[:, 0], [-1, 0, 1])
    assert d.y_mean == 0.0


def test_preprocess_standardize():
    d = preprocess(np.array([[2.0], [4.0], [6.0]]), np.array([1.0, 2.0, 4.0]), standardize=True)
    np.testing.assert_allclose(d.X[:, 0], [-1, 0, 1])
    np.testing.assert_allclose(d.column_scales, [2.0])
    np.testing.assert_array_equal(d.y, [1.0, 2.0, 4.0])  # response is left uncentred


def test_preprocess_constant_column_warns():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    with pytest.warns(DegenerateColumnWarning):
        d = preprocess(X, np.zeros(3), standardize=True)
    np.testing.assert_array_equal(d.X[:, 0], 0.0)
    assert d.column_scales[0] == 1.0
    assert d.degenerate_columns == (0,)


def test_preprocess_invariants_and_idempotence():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(30, 4))
    d = preprocess(X, rng.standard_normal(30), standardize=True)
    np.testing.assert_allclose(d.X.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(d.X.std(axis=0, ddof=1), 1, atol=1e-8)
    d2 = preprocess(d.X, d.y, standardize=True)
    np.testing.assert_allclose(d2.X, d.X, atol=1e-12)


def test_preprocess_errors():
    with pytest.raises(DimensionMismatch):
        preprocess(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(DimensionMismatch):
        preprocess(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(ValueError):
        preprocess(np.array([[np.nan, 1.0], [1.0, 2.0]]), np.zeros(2))


def test_fit_config_validation():
    for bad in ({"k": 0}, {"w": -1}, {"lambda_V": -0.1}, {"rho1": 0}, {"tol_abs": 0},
                {"algorithm": "sgd"}, {"max_iter": 0}):
        with pytest.raises(ValueError):
            FitConfig(**bad)
    with pytest.raises(DimensionMismatch):
        FitConfig(k=7).check_dims(make_data(p=6))


def test_objective_variance_of_y():
    d = make_data(n=20, p=3)
    V = np.eye(3)[:, :1]
    val = objective(d, d.y.mean(), np.zeros(1), d.X @ V, V, FitConfig(w=0.0))
    assert val == pytest.approx(np.var(d.y), rel=1e-12)


def test_objective_rss_of_linear_model():
    d = make_data(n=20, p=3)
    beta = np.array([0.5, -1.0, 2.0])
    val = objective(d, 0.3, beta, d.X, np.eye(3), FitConfig(k=3, w=0.0))
    r = d.y - 0.3 - d.X @ beta
    assert val == pytest.approx(r @ r / 20, rel=1e-12)


def test_objective_term_by_term_oracle():
    rng = np.random.default_rng(1)
    d = preprocess(rng.standard_normal((8, 3)), rng.standard_normal(8))
    V = rng.standard_normal((3, 2))
    Z = rng.standard_normal((8, 2))
    beta = rng.standard_normal(2)
    cfg = FitConfig(k=2, w=0.7, lambda_V=0.3, lambda_beta=0.2)
    expected = sum(objective_terms(d.X, d.y, 0.4, beta, Z, V, 0.7, 0.3, 0.2))
    assert objective(d, 0.4, beta, Z, V, cfg) == pytest.approx(expected, rel=1e-12)


def test_objective_sign_flip_invariance():
    rng = np.random.default_rng(2)
    d = make_data(n=15, p=4)
    V, Z, beta = rng.standard_normal((4, 2)), rng.standard_normal((15, 2)), rng.standard_normal(2)
    cfg = FitConfig(k=2, w=0.5, lambda_V=0.1, lambda_beta=0.1)
    flip = np.array([1.0, -1.0])
    assert objective(d, 0.1, beta * flip, Z * flip, V * flip, cfg) == pytest.approx(
        objective(d, 0.1, beta, Z, V, cfg), rel=1e-13)


def test_objective_dimension_errors():
    d = make_data(n=10, p=3)
    with pytest.raises(DimensionMismatch):
        objective(d, 0.0, np.zeros(2), np.zeros((10, 2)), np.zeros((4, 2)), FitConfig(k=2))
    with pytest.raises(DimensionMismatch):
        objective(d, 0.0, np.zeros(2), np.zeros((9, 2)), np.zeros((3, 2)), FitConfig(k=2))


def test_predict_examples():
    d = make_data(n=10, p=4, seed=3)
    model = fit(d, FitConfig(k=2, lambda_V=0.01, lambda_beta=0.01))
    zero_row = d.column_means[None, :]
    assert predict(model, zero_row)[0] == pytest.approx(model.intercept, abs=1e-12)
    X_raw = d.X + d.column_means
    manual = model.intercept + (X_raw - d.column_means) @ model.V_regression @ model.beta
    np.testing.assert_allclose(predict(model, X_raw), manual, atol=1e-12)
    np.testing.assert_allclose(predict(model, X_raw, d), manual, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        predict(model, np.zeros((2, 3)))


def test_predict_zero_beta_is_constant():
    d = make_data(n=12, p=3)
    model = dataclasses.replace(fit(d, FitConfig()), beta=np.zeros(1))
    pred = predict(model, np.random.default_rng(0).standard_normal((5, 3)))
    np.testing.assert_array_equal(pred, model.intercept)


def test_huge_lambda_beta_zeroes_sparse_coefficients():
    d = make_data(n=12, p=3)
    model = fit(d, FitConfig(lambda_beta=1e3))
    np.testing.assert_array_equal(model.beta_sparse, 0.0)
    np.testing.assert_array_equal(model.composite_coefficients, 0.0)


def test_predict_reproduces_training_residual_base():
    d = make_data(n=30, p=5, seed=4)
    for algorithm in ("admm", "ladmm"):
        model = fit(d, FitConfig(k=2, lambda_V=0.05, lambda_beta=0.05, algorithm=algorithm))
        fitted = predict(model, d.X + d.column_means)
        # the final intercept update is the mean of y - X V_reg beta
        assert np.mean(d.y - fitted) == pytest.approx(0.0, abs=1e-10)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert np.all(np.isfinite(fitted))
