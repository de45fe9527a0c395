import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_data
from spcrsvd import FitConfig, fit, predict, preprocess
from spcrsvd.errors import DimensionMismatch, FoldTooSmall, UndefinedRate
from spcrsvd.selection import (
    CvPlan, assign_folds, cross_validate, default_grid, evaluate, make_plan, mse, tpr_tnr,
)
from spcrsvd.simulate import make_design, sample


@given(st.integers(2, 200), st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_assign_folds_balanced(n, K, seed):
    K = min(K, n)
    folds = assign_folds(n, K, seed)
    counts = np.bincount(folds, minlength=K)
    assert counts.min() >= 1 and counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(folds, assign_folds(n, K, seed))


def test_assign_folds_invalid():
    with pytest.raises(ValueError):
        assign_folds(5, 1)
    with pytest.raises(ValueError):
        assign_folds(5, 6)


def test_default_grid_scale(data):
    g = default_grid(data, size=4)
    scale = np.max(np.abs(data.X.T @ (data.y - data.y.mean()))) / data.n
    np.testing.assert_allclose(g, np.geomspace(1e-3 * scale, 10 * scale, 4))


def test_make_plan_validation(data):
    with pytest.raises(ValueError):
        make_plan(data, grid_lambda_V=[])
    with pytest.raises(ValueError):
        make_plan(data, grid_lambda_beta=[-1.0])


def test_single_point_grid(data):
    plan = make_plan(data, K=4, grid_lambda_V=[0.07], grid_lambda_beta=[0.03], seed=1)
    res = cross_validate(data, FitConfig(k=2), plan)
    assert (res.best_lambda_V, res.best_lambda_beta) == (0.07, 0.03)
    assert res.refit_model.config.lambda_V == 0.07
    assert res.cv_surface.shape == (1, 1) and np.isfinite(res.cv_surface).all()


def test_duplicate_grid_points_tie_break(data):
    plan = make_plan(data, K=4, grid_lambda_V=[0.1, 0.1], grid_lambda_beta=[0.05, 0.05], seed=1)
    res = cross_validate(data, FitConfig(k=1), plan)
    assert np.all(res.cv_surface == res.cv_surface[0, 0])
    assert (res.best_lambda_V, res.best_lambda_beta) == (0.1, 0.05)


def test_tie_break_prefers_least_shrinkage(data):
    # identical surfaces: a grid with the same value repeated under different orderings
    plan = make_plan(data, K=3, grid_lambda_V=[0.2, 0.2], grid_lambda_beta=[0.0, 0.0], seed=0)
    res = cross_validate(data, FitConfig(k=1), plan)
    assert res.best_lambda_beta == 0.0


def case1_fixture(n=60, seed=3):
    X, y = sample(make_design(1), n, np.random.default_rng(seed))
    return X, y, preprocess(X, y)


def test_cv_surface_matches_independent_loop():
    X, y, d = case1_fixture()
    gv, gb = [0.01, 0.1, 0.5], [0.005, 0.05, 0.3]
    plan = make_plan(d, K=5, grid_lambda_V=gv, grid_lambda_beta=gb, seed=4)
    base = FitConfig(k=1)
    res = cross_validate(d, base, plan)
    expected = np.zeros((3, 3))
    for i, lv in enumerate(gv):
        for j, lb in enumerate(gb):
            errs = []
            for f in range(5):
                test = plan.fold_assignment == f
                train = preprocess(X[~test], y[~test])
                m = fit(train, dataclasses.replace(base, lambda_V=lv, lambda_beta=lb))
                errs.append(np.mean((y[test] - predict(m, X[test])) ** 2))
            expected[i, j] = np.mean(errs)
    np.testing.assert_allclose(res.cv_surface, expected, rtol=1e-12)
    i, j = np.unravel_index(np.argmin(np.where(res.converged_surface == 1, res.cv_surface, np.inf)), (3, 3))
    assert (res.best_lambda_V, res.best_lambda_beta) == (gv[i], gb[j])


def test_cv_fold_label_permutation_invariance():
    _, _, d = case1_fixture(n=40)
    plan = make_plan(d, K=4, grid_lambda_V=[0.05, 0.2], grid_lambda_beta=[0.05], seed=2)
    perm = np.array([2, 0, 3, 1])
    plan2 = dataclasses.replace(plan, fold_assignment=perm[plan.fold_assignment])
    a = cross_validate(d, FitConfig(k=1), plan)
    b = cross_validate(d, FitConfig(k=1), plan2)
    np.testing.assert_allclose(a.cv_surface, b.cv_surface, rtol=1e-12)


def test_cv_no_leakage():
    """Held-out rows are transformed with training-fold statistics only."""
    X, y, _ = case1_fixture(n=40, seed=5)
    folds = assign_folds(40, 4, seed=0)
    X = X.copy()
    X[folds == 0, 0] += 25.0  # fold 0 has a shifted covariate mean
    y = y + 2.0 * (folds == 0) * 25.0
    d = preprocess(X, y)
    plan = CvPlan(K=4, grid_lambda_V=np.array([0.05]), grid_lambda_beta=np.array([0.05]), fold_assignment=folds)
    cfg = FitConfig(k=1, lambda_V=0.05, lambda_beta=0.05)
    ours = cross_validate(d, FitConfig(k=1), plan).cv_surface[0, 0]
    leaked = []
    for f in range(4):
        test = folds == f
        train = preprocess(d.X[~test], y[~test])  # centred with full-data means
        m = fit(train, cfg)
        leaked.append(np.mean((y[test] - m.intercept - d.X[test] @ m.regression_coefficients) ** 2))
    assert abs(ours - np.mean(leaked)) > 1e-3 * ours


def test_cv_parallel_matches_serial(data):
    plan = make_plan(data, K=3, grid_size=3, seed=9)
    a = cross_validate(data, FitConfig(k=1), plan)
    b = cross_validate(data, FitConfig(k=1), plan, n_jobs=4)
    np.testing.assert_array_equal(a.cv_surface, b.cv_surface)
    assert (a.best_lambda_V, a.best_lambda_beta) == (b.best_lambda_V, b.best_lambda_beta)


def test_cv_prefers_converged_grid_points(data):
    plan = make_plan(data, K=3, grid_size=4, seed=0)
    res = cross_validate(data, FitConfig(k=1, max_iter=60), plan)
    i = int(np.flatnonzero(plan.grid_lambda_V == res.best_lambda_V)[0])
    j = int(np.flatnonzero(plan.grid_lambda_beta == res.best_lambda_beta)[0])
    if (res.converged_surface == 1).any():
        assert res.converged_surface[i, j] == 1
    loose = cross_validate(data, FitConfig(k=1, max_iter=60), plan, require_converged=False)
    assert loose.cv_surface[np.unravel_index(np.argmin(loose.cv_surface), loose.cv_surface.shape)] == \
        loose.cv_surface.min()


def test_cv_errors(data):
    with pytest.raises(FoldTooSmall):
        d = make_data(n=4, p=3)
        cross_validate(d, FitConfig(k=3), make_plan(d, K=4, grid_size=1))
    plan = make_plan(data, K=3, grid_size=1)
    with pytest.raises(DimensionMismatch):
        cross_validate(data, FitConfig(), dataclasses.replace(plan, fold_assignment=plan.fold_assignment[:-1]))
    with pytest.raises(ValueError):
        cross_validate(data, FitConfig(), dataclasses.replace(plan, K=1))


def test_leave_one_out_small():
    d = make_data(n=12, p=3, seed=2)
    res = cross_validate(d, FitConfig(k=1), make_plan(d, K=12, grid_lambda_V=[0.05], grid_lambda_beta=[0.05]))
    assert np.isfinite(res.cv_surface).all()


def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([0.0, 0.0], [1.0, -1.0]) == 1.0
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(101), rng.standard_normal(101)
    total = 0.0
    for u, v in zip(a, b):
        total += (u - v) ** 2
    assert mse(a, b) == pytest.approx(total / 101, rel=1e-12)
    with pytest.raises(DimensionMismatch):
        mse([1.0], [1.0, 2.0])


def test_tpr_tnr_examples():
    truth = np.array([2.0, 1.0] + [0.0] * 8)
    assert tpr_tnr(truth, truth) == (1.0, 1.0)
    assert tpr_tnr(np.zeros(10), truth) == (0.0, 1.0)
    est = np.array([1.9, 0.0, 0.3] + [0.0] * 7)
    assert tpr_tnr(est, truth) == (0.5, 7 / 8)


def test_tpr_tnr_zero_tol_and_scale_invariance():
    truth = np.array([1.0, 0.0, 0.0, 3.0])
    est = np.array([0.5, 1e-9, 0.2, 0.0])
    assert tpr_tnr(est, truth) == (0.5, 0.5)
    assert tpr_tnr(10 * est, truth) == tpr_tnr(est, truth)


def test_tpr_tnr_undefined():
    tpr, tnr = tpr_tnr(np.ones(3), np.ones(3))
    assert tpr == 1.0 and np.isnan(tnr)
    with pytest.raises(UndefinedRate):
        tpr_tnr(np.ones(3), np.ones(3), strict=True)
    with pytest.raises(UndefinedRate):
        tpr_tnr(np.ones(3), np.zeros(3), strict=True)
    with pytest.raises(DimensionMismatch):
        tpr_tnr(np.ones(3), np.ones(4))


def test_evaluate():
    X, y, d = case1_fixture()
    model = fit(d, FitConfig(k=1, lambda_V=0.05, lambda_beta=0.05))
    m = evaluate(model, X, y, truth=make_design(1).zeta)
    assert m.mse == pytest.approx(mse(y, predict(model, X)))
    assert 0 <= m.tpr <= 1 and 0 <= m.tnr <= 1
    assert np.isnan(evaluate(model, X, y).tpr)
