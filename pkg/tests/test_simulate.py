import math

import numpy as np
import pytest

from spcrsvd.errors import SingleReplicateWarning
from spcrsvd.simulate import (
    DEFAULT_METHODS, generate, make_design, read_records_csv, records_csv, render_table,
    replicate_rng, run_experiment, run_replicate, sample, summarize,
)


@pytest.mark.parametrize("case, p", [(1, 10), (2, 10), (3, 20), (4, 30), (5, 30)])
def test_design_shapes_and_spd(case, p):
    d = make_design(case)
    assert d.p == p and d.Sigma.shape == (p, p)
    np.testing.assert_array_equal(d.Sigma, d.Sigma.T)
    assert np.linalg.eigvalsh(d.Sigma).min() > 0


def test_design_coefficients():
    np.testing.assert_array_equal(make_design(1).zeta, [2, 1] + [0] * 8)
    np.testing.assert_array_equal(make_design(2).zeta, [8, 1] + [0] * 8)
    assert make_design(2).Sigma[1, 1] == 9.0
    nu = np.array([-1, 0, 1, 1, 0, -1, -1, 0, 1.0])
    np.testing.assert_array_equal(make_design(3).zeta[:9], 4 * nu)
    np.testing.assert_array_equal(make_design(4).zeta[9:15], 4.0)
    np.testing.assert_array_equal(make_design(5).zeta[9:15], 4 * np.array([1, 0, -1, -1, 0, 1.0]))
    assert make_design(3).Sigma[0, 2] == pytest.approx(0.81)


def test_design_errors():
    with pytest.raises(ValueError):
        make_design(6)
    with pytest.raises(ValueError):
        make_design(1, sigma=0.0)


def test_generate_noise_free():
    design = make_design(1, sigma=1e-300)
    d = generate(design, 20, rng_seed=0)
    resid = d.y - (d.X + d.column_means) @ design.zeta
    assert np.max(np.abs(resid)) <= 1e-12


def test_generate_covariance_case1():
    X, _ = sample(make_design(1), 100_000, np.random.default_rng(1))
    assert np.max(np.abs(np.cov(X, rowvar=False) - np.eye(10))) < 0.05


def test_generate_variance_case2():
    X, _ = sample(make_design(2), 100_000, np.random.default_rng(2))
    assert abs(np.var(X[:, 1], ddof=1) - 9.0) < 0.45


def test_replicate_streams_independent():
    a = replicate_rng(0, 1, 0).standard_normal(3)
    b = replicate_rng(0, 1, 1).standard_normal(3)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, replicate_rng(0, 1, 0).standard_normal(3))


def test_oracle_method_mse_is_noise_variance():
    rep = run_experiment(make_design(1, n=30), methods=("oracle",), reps=10, n_test=500, seed=3)
    s = rep.summary["oracle"]
    assert abs(s.mse_mean - 1.0) <= 3 * s.mse_sd / math.sqrt(10) + 3 * math.sqrt(2 / 500)


def test_determinism_and_parallel():
    design = make_design(1, n=30)
    kw = dict(methods=DEFAULT_METHODS, reps=2, n_test=200, seed=7, grid_size=2)
    a = run_experiment(design, **kw)
    b = run_experiment(design, **kw)
    c = run_experiment(design, n_jobs=2, **kw)
    assert records_csv(a.records) == records_csv(b.records) == records_csv(c.records)
    assert render_table(a) == render_table(c)


def test_aggregation_from_persisted_records():
    rep = run_experiment(make_design(2, n=30), methods=("admm", "pcr"), reps=3, n_test=200, grid_size=2)
    again = summarize(read_records_csv(records_csv(rep.records)), ("admm", "pcr"))
    for m in ("admm", "pcr"):
        for attr in ("mse_mean", "mse_sd", "tpr_mean", "tnr_mean"):
            x, y = getattr(rep.summary[m], attr), getattr(again[m], attr)
            assert (math.isnan(x) and math.isnan(y)) or abs(x - y) <= 1e-12


def test_single_replicate_warns():
    with pytest.warns(SingleReplicateWarning):
        rep = run_experiment(make_design(1, n=30), methods=("pcr",), reps=1, n_test=100)
    assert rep.summary["pcr"].mse_sd == 0.0
    with pytest.raises(ValueError):
        run_experiment(make_design(1), reps=0)


def test_record_fields_and_table():
    recs = run_replicate(make_design(4, n=40), ("admm", "pls"), rep=0, n_test=100, grid_size=2)
    assert [r["method"] for r in recs] == ["admm", "pls"]
    assert 0 <= recs[0]["tpr"] <= 1 and math.isnan(recs[1]["tpr"])
    text = records_csv(recs)
    assert text.splitlines()[0] == "case,sigma,n,k,method,rep,mse,tpr,tnr,converged"
    rep = run_experiment(make_design(4, n=40), methods=("pcr",), reps=2, n_test=100)
    assert "Case 4 (p=30)" in render_table(rep)
    with pytest.raises(ValueError):
        run_replicate(make_design(1), ("lasso",), rep=0)


@pytest.mark.slow
def test_case1_n50_admm_band():
    rep = run_experiment(make_design(1, n=50), methods=("admm",), reps=20, n_test=1000, n_jobs=8)
    assert 1.0 <= rep.summary["admm"].mse_mean <= 1.5
