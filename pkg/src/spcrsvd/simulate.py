"""Monte Carlo designs and the replicated benchmark harness."""

import csv
import dataclasses
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .baselines import select_components
from .errors import NotPositiveDefinite, SingleReplicateWarning
from .model import FitConfig, preprocess
from .selection import cross_validate, make_plan, mse, tpr_tnr

METHOD_LABELS = {
    "ladmm": "SPCRsvd-LADMM",
    "admm": "SPCRsvd-ADMM",
    "pls": "PLS",
    "pcr": "PCR",
    "oracle": "Oracle",
}
DEFAULT_METHODS = ("ladmm", "admm", "pls", "pcr")
RECORD_FIELDS = ("case", "sigma", "n", "k", "method", "rep", "mse", "tpr", "tnr", "converged")

_NU = np.array([-1, 0, 1, 1, 0, -1, -1, 0, 1], dtype=float)


@dataclass(frozen=True)
class SimDesign:
    """One generative design; ``zeta`` already includes the scalar multiplier
    of the response model, so ``y = X @ zeta + noise``."""

    case_id: int
    n: int
    sigma: float
    Sigma: np.ndarray = field(repr=False)
    zeta: np.ndarray

    @property
    def p(self):
        return self.zeta.size


def ar_block(size, rho=0.9):
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def make_design(case_id, n=50, sigma=1.0):
    """Covariance and true coefficients for designs 1-5."""
    if case_id == 1:
        Sigma = np.eye(10)
        zeta = np.zeros(10)
        zeta[:2] = (2.0, 1.0)
    elif case_id == 2:
        Sigma = np.diag([1.0, 9.0] + [1.0] * 8)
        zeta = np.zeros(10)
        zeta[:2] = (8.0, 1.0)
    elif case_id == 3:
        Sigma = scipy.linalg.block_diag(ar_block(9), np.eye(11))
        zeta = np.zeros(20)
        zeta[:9] = 4.0 * _NU
    elif case_id in (4, 5):
        nu2 = np.ones(6) if case_id == 4 else np.array([1.0, 0, -1, -1, 0, 1])
        Sigma = scipy.linalg.block_diag(ar_block(9), ar_block(6), np.eye(15))
        zeta = np.zeros(30)
        zeta[:9] = 4.0 * _NU
        zeta[9:15] = 4.0 * nu2
    else:
        raise ValueError(f"case must be in 1..5, got {case_id}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return SimDesign(case_id=case_id, n=n, sigma=float(sigma), Sigma=Sigma, zeta=zeta)


def sample(design, n, rng):
    """Draw raw ``(X, y)``: ``X ~ N(0, Sigma)`` via Cholesky, Gaussian noise."""
    try:
        L = np.linalg.cholesky(design.Sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    X = rng.standard_normal((n, design.p)) @ L.T
    y = X @ design.zeta + design.sigma * rng.standard_normal(n)
    return X, y


def generate(design, n, rng_seed, standardize=False):
    X, y = sample(design, n, np.random.default_rng(rng_seed))
    return preprocess(X, y, standardize=standardize)


def replicate_rng(seed, case_id, rep):
    """Independent stream for one replicate, replayable from its counter."""
    return np.random.default_rng([int(seed), int(case_id), int(rep)])


@dataclass
class MethodSummary:
    mse_mean: float
    mse_sd: float
    tpr_mean: float
    tpr_sd: float
    tnr_mean: float
    tnr_sd: float
    not_converged: int


@dataclass
class ExperimentReport:
    design: SimDesign
    k: int
    reps: int
    n_test: int
    records: list
    summary: dict  # method -> MethodSummary


def _sd(values):
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return float("nan")
    if values.size == 1:
        return 0.0
    return float(np.std(values, ddof=1))


def _mean(values):
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    return float(values.mean()) if values.size else float("nan")


def summarize(records, methods):
    """Per-method mean/sd of MSE, TPR and TNR over replicate records."""
    out = {}
    for m in methods:
        rows = [r for r in records if r["method"] == m]
        if not rows:
            continue
        out[m] = MethodSummary(
            mse_mean=_mean([r["mse"] for r in rows]), mse_sd=_sd([r["mse"] for r in rows]),
            tpr_mean=_mean([r["tpr"] for r in rows]), tpr_sd=_sd([r["tpr"] for r in rows]),
            tnr_mean=_mean([r["tnr"] for r in rows]), tnr_sd=_sd([r["tnr"] for r in rows]),
            not_converged=sum(1 for r in rows if not r["converged"]),
        )
    return out


def run_replicate(design, methods, rep, k=1, w=0.1, n_test=1000, seed=0, grid_size=5,
                  spcr_folds=5, baseline_folds=10, max_iter=2000):
    """Train/test draw plus one fit per method. Returns a list of records."""
    rng = replicate_rng(seed, design.case_id, rep)
    X, y = sample(design, design.n, rng)
    X_test, y_test = sample(design, n_test, rng)
    fold_seed = int(rng.integers(2**31))
    d = preprocess(X, y)
    base = {"case": design.case_id, "sigma": design.sigma, "n": design.n, "k": k, "rep": rep}
    records = []
    for method in methods:
        tpr = tnr = float("nan")
        converged = True
        if method in ("admm", "ladmm"):
            cfg = FitConfig(k=k, w=w, algorithm=method, max_iter=max_iter, seed=fold_seed)
            plan = make_plan(d, K=spcr_folds, seed=fold_seed, grid_size=grid_size)
            model = cross_validate(d, cfg, plan).refit_model
            y_hat = model.intercept + d.transform(X_test) @ model.regression_coefficients
            tpr, tnr = tpr_tnr(model.composite_coefficients, design.zeta)
            converged = model.diagnostics.converged
        elif method in ("pcr", "pls"):
            model, _ = select_components(d, method, k, folds=baseline_folds, seed=fold_seed)
            y_hat = model.predict(X_test)
        elif method == "oracle":
            y_hat = X_test @ design.zeta
        else:
            raise ValueError(f"unknown method {method!r}")
        records.append(dict(base, method=method, mse=mse(y_test, y_hat), tpr=tpr, tnr=tnr,
                            converged=bool(converged)))
    return records


def run_experiment(design, methods=DEFAULT_METHODS, reps=20, n_test=1000, k=1, w=0.1, seed=0,
                   grid_size=5, spcr_folds=5, baseline_folds=10, max_iter=2000, n_jobs=1):
    """Replicated benchmark of ``methods`` on one design.

    Replicates are independent given ``seed`` and may run on ``n_jobs``
    threads; records come back in replicate order either way.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if reps == 1:
        warnings.warn("single replicate: standard deviations reported as 0",
                      SingleReplicateWarning, stacklevel=2)

    def one(rep):
        return run_replicate(design, methods, rep, k=k, w=w, n_test=n_test, seed=seed,
                             grid_size=grid_size, spcr_folds=spcr_folds,
                             baseline_folds=baseline_folds, max_iter=max_iter)

    if n_jobs == 1:
        per_rep = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_rep = list(pool.map(one, range(reps)))
    records = [rec for recs in per_rep for rec in recs]
    return ExperimentReport(design=design, k=k, reps=reps, n_test=n_test, records=records,
                            summary=summarize(records, methods))


def _fmt(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def records_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow([r["case"], _fmt(r["sigma"]), r["n"], r["k"], r["method"], r["rep"],
                         _fmt(r["mse"]), _fmt(r["tpr"]), _fmt(r["tnr"]), int(r["converged"])])
    return buf.getvalue()


def read_records_csv(text):
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({
            "case": int(r["case"]), "sigma": float(r["sigma"]), "n": int(r["n"]), "k": int(r["k"]),
            "method": r["method"], "rep": int(r["rep"]), "mse": float(r["mse"]),
            "tpr": float(r["tpr"]), "tnr": float(r["tnr"]), "converged": bool(int(r["converged"])),
        })
    return rows


def render_table(report):
    """Plain-text table: means with standard deviations in parentheses."""
    d = report.design
    methods = list(report.summary)
    labels = [METHOD_LABELS.get(m, m) for m in methods]
    width = max(14, *(len(s) + 2 for s in labels))
    lines = [
        f"Case {d.case_id} (p={d.p}), {report.reps} replicates, test size {report.n_test}",
        "Mean (standard deviation) of test MSE",
        f"{'sigma':>6}{'n':>6}{'k':>4}" + "".join(f"{s:>{width}}" for s in labels),
        f"{d.sigma:>6g}{d.n:>6}{report.k:>4}"
        + "".join(f"{report.summary[m].mse_mean:>{width}.3f}" for m in methods),
        " " * 16 + "".join(f"{'(' + format(report.summary[m].mse_sd, '.3f') + ')':>{width}}" for m in methods),
    ]
    sparse = [m for m in methods if not math.isnan(report.summary[m].tpr_mean)]
    if sparse:
        lines.append("")
        lines.append("Mean (standard deviation) of TPR / TNR")
        lines.append(" " * 20 + "".join(f"{METHOD_LABELS.get(m, m):>{width}}" for m in sparse))
        for name, mean_attr, sd_attr in (("TPR", "tpr_mean", "tpr_sd"), ("TNR", "tnr_mean", "tnr_sd")):
            lines.append(f"{name:>20}" + "".join(f"{getattr(report.summary[m], mean_attr):>{width}.3f}"
                                                 for m in sparse))
            lines.append(" " * 20 + "".join(
                f"{'(' + format(getattr(report.summary[m], sd_attr), '.3f') + ')':>{width}}" for m in sparse))
    nc = {m: s.not_converged for m, s in report.summary.items() if s.not_converged}
    if nc:
        lines.append("")
        lines.append("replicates hitting max_iter: " + ", ".join(f"{METHOD_LABELS.get(m, m)}={c}"
                                                                for m, c in nc.items()))
    return "\n".join(lines) + "\n"
