"""Command-line entry point: ``spcrsvd {fit,predict,cv,simulate}``."""

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from . import io as spio
from .errors import DimensionMismatch, ParseError, SpcrError
from .model import FitConfig, objective, predict, preprocess
from .selection import cross_validate, make_plan, mse
from .simulate import DEFAULT_METHODS, make_design, records_csv, render_table, run_experiment
from .solvers import fit

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_DIMENSION = 4
EXIT_NOT_CONVERGED = 5


def _grid(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("grid must hold at least one nonnegative value")
    return values


def _add_model_flags(p):
    p.add_argument("--algorithm", choices=("admm", "ladmm"), default="admm")
    p.add_argument("--k", type=int, default=1, help="number of principal components")
    p.add_argument("--w", type=float, default=0.01, help="weight of the PCA loss")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)


def _add_data_flags(p):
    p.add_argument("input", help="CSV file with a header row")
    p.add_argument("--target", required=True, help="name of the response column")
    p.add_argument("--drop", default="", help="comma-separated columns to ignore")
    p.add_argument("--standardize", action="store_true", help="scale covariates to unit variance")


def build_parser():
    parser = argparse.ArgumentParser(prog="spcrsvd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model at fixed penalties")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--lambda-v", type=float, default=0.0)
    p.add_argument("--lambda-beta", type=float, default=0.0)
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("predict", help="predict from a saved model")
    p.add_argument("input", help="CSV file holding the covariate columns")
    p.add_argument("--model", required=True)
    p.add_argument("--target", help="response column; when present the test MSE is printed")
    p.add_argument("--out", help="write predictions here instead of standard output")

    p = sub.add_parser("cv", help="select penalties by K-fold CV and refit")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=_grid, help="penalty values used for both lambdas, e.g. '0.01,0.1,1'")
    p.add_argument("--grid-size", type=int, default=10, help="size of the data-driven grid when --grid is absent")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="refit model file to write")
    p.add_argument("--surface", help="CV surface CSV (defaults to <out>.cv.csv)")

    p = sub.add_parser("simulate", help="run a Monte Carlo design")
    p.add_argument("--case", type=int, required=True, choices=range(1, 6), metavar="{1..5}")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--w", type=float, default=0.1)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--grid-size", type=int, default=5)
    p.add_argument("--methods", default=",".join(DEFAULT_METHODS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="directory for records.csv and summary.txt")
    return parser


def _load(args):
    drop = tuple(c.strip() for c in args.drop.split(",") if c.strip())
    X, y, names = spio.read_csv(args.input, args.target, drop)
    return preprocess(X, y, standardize=args.standardize), names


def _config(args, **extra):
    return FitConfig(k=args.k, w=args.w, algorithm=args.algorithm, max_iter=args.max_iter,
                     seed=args.seed, **extra)


def _summary(model, d, out):
    diag = model.diagnostics
    obj = objective(d, model.intercept, model.beta, model.Z, model.V, model.config)
    print(f"algorithm       {model.config.algorithm}", file=out)
    print(f"lambda_V        {model.config.lambda_V:.6g}", file=out)
    print(f"lambda_beta     {model.config.lambda_beta:.6g}", file=out)
    print(f"objective       {obj:.10g}", file=out)
    print(f"iterations      {diag.iterations}", file=out)
    print(f"converged       {'yes' if diag.converged else 'no'}", file=out)
    print(f"nonzeros V0     {int(np.count_nonzero(model.V_sparse))} of {model.V_sparse.size}", file=out)
    print(f"nonzeros beta0  {int(np.count_nonzero(model.beta_sparse))} of {model.beta_sparse.size}", file=out)
    print(f"intercept       {model.intercept:.10g}", file=out)


def _finish(model, out):
    if not model.diagnostics.converged:
        print("warning: stopped at max_iter before meeting the tolerance", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_fit(args, out=sys.stdout):
    d, names = _load(args)
    cfg = _config(args, lambda_V=args.lambda_v, lambda_beta=args.lambda_beta)
    model = fit(d, cfg)
    spio.save_model(model, args.out, names)
    _summary(model, d, out)
    return _finish(model, out)


def cmd_predict(args, out=sys.stdout):
    model, names = spio.load_model(args.model)
    if names is None:
        raise ParseError("model file does not record covariate names")
    X = spio.read_matrix_csv(args.input, names)
    y_hat = predict(model, X)
    lines = "prediction\n" + "".join(format(float(v), ".17g") + "\n" for v in y_hat)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(lines)
    else:
        out.write(lines)
    if args.target:
        _, y, _ = spio.read_csv(args.input, args.target, drop=[])
        print(f"mse {mse(y, y_hat):.17g}", file=out if args.out else sys.stderr)
    return EXIT_OK


def cmd_cv(args, out=sys.stdout):
    d, names = _load(args)
    if args.folds < 2:
        raise ValueError("--folds must be >= 2")
    cfg = _config(args)
    plan = make_plan(d, K=args.folds, grid_lambda_V=args.grid, grid_lambda_beta=args.grid,
                     seed=args.seed, grid_size=args.grid_size)
    res = cross_validate(d, cfg, plan, n_jobs=args.jobs)
    surface = args.surface or args.out + ".cv.csv"
    with open(surface, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda_V", "lambda_beta", "cv_mse", "converged_fraction"])
        for i, lv in enumerate(plan.grid_lambda_V):
            for j, lb in enumerate(plan.grid_lambda_beta):
                writer.writerow([repr(float(lv)), repr(float(lb)), repr(float(res.cv_surface[i, j])),
                                 repr(float(res.converged_surface[i, j]))])
    spio.save_model(res.refit_model, args.out, names)
    print(f"selected lambda_V={res.best_lambda_V:.6g} lambda_beta={res.best_lambda_beta:.6g}", file=out)
    print(f"cv surface written to {surface}", file=out)
    _summary(res.refit_model, d, out)
    return _finish(res.refit_model, out)


def cmd_simulate(args, out=sys.stdout):
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    design = make_design(args.case, n=args.n, sigma=args.sigma)
    report = run_experiment(design, methods=methods, reps=args.reps, n_test=args.n_test, k=args.k,
                            w=args.w, seed=args.seed, grid_size=args.grid_size, n_jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    table = render_table(report)
    with open(os.path.join(args.out, "records.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(records_csv(report.records))
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    out.write(table)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv, "simulate": cmd_simulate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatch as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (SpcrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
