"""Compare the compiled sweep loop against the pure-Python one.

Runs fixed-iteration ADMM and LADMM fits (the tolerance is set to a negligible value so
both backends do exactly ``--iters`` sweeps) on random designs of a few
sizes and prints wall time per fit plus the max-abs difference between
the two backends' composite coefficients.

    python benchmarks/bench_kernels.py --iters 500 --repeat 3
"""

import argparse
import time

import numpy as np

from spcrsvd import HAVE_COMPILED, FitConfig, fit, preprocess

SIZES = ((50, 10, 1), (200, 30, 2), (500, 60, 3))


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--iters", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_COMPILED:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    print(f"{'algorithm':<8}{'n':>6}{'p':>5}{'k':>3}{'python s':>12}{'compiled s':>12}{'speedup':>9}{'max diff':>11}")
    for n, p, k in SIZES:
        X = rng.standard_normal((n, p))
        y = X[:, :3] @ np.array([2.0, 1.0, -1.0]) + rng.standard_normal(n)
        d = preprocess(X, y)
        for algorithm in ("admm", "ladmm"):
            cfg = FitConfig(k=k, w=0.1, lambda_V=0.05, lambda_beta=0.05, algorithm=algorithm,
                            max_iter=args.iters, tol_abs=1e-300, tol_rel=1e-300)
            t_py, m_py = _time(lambda: fit(d, cfg, backend="python"), args.repeat)
            t_c, m_c = _time(lambda: fit(d, cfg, backend="compiled"), args.repeat)
            diff = float(np.max(np.abs(m_py.composite_coefficients - m_c.composite_coefficients)))
            print(f"{algorithm:<8}{n:>6}{p:>5}{k:>3}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>8.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    main()
