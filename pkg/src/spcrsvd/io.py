"""CSV ingestion and the text model-file format.

Model files are plain text: a ``spcrsvd-model`` magic line with a format
version, ``key = value`` header lines, then named matrix blocks written
row-major with 17 significant digits so that every float round-trips
exactly::

    spcrsvd-model 1
    algorithm = admm
    ...
    [beta] 1 1
    2.1926171600000001
"""

import csv
import io
import json

import numpy as np

from .errors import DimensionMismatch, ParseError
from .model import ConvergenceReport, FitConfig, SpcrsvdModel

MAGIC = "spcrsvd-model"
FORMAT_VERSION = 1

_MATRICES = ("beta", "beta_sparse", "V", "V_sparse", "V_regression", "Z",
             "column_means", "column_scales")


def read_csv(path_or_buffer, target, drop=()):
    """Read a comma-separated file with a header row.

    Returns ``(X, y, covariate_names)`` where ``y`` is the ``target``
    column and every other column not listed in ``drop`` is a covariate.
    Data rows are numbered from 1 in error messages.
    """
    if hasattr(path_or_buffer, "read"):
        text = path_or_buffer.read()
    else:
        with open(path_or_buffer, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty CSV file") from None
    if target not in header:
        raise ParseError(f"target column {target!r} not in header", column=target)
    missing = [c for c in drop if c not in header]
    if missing:
        raise ParseError(f"columns to drop not in header: {missing}", column=missing[0])
    covariates = [c for c in header if c != target and c not in drop]
    if not covariates:
        raise ParseError("no covariate columns left")
    col_index = {c: i for i, c in enumerate(header)}
    rows_X, rows_y = [], []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {row_no}: expected {len(header)} fields, got {len(row)}", row=row_no)
        values = {}
        for name in covariates + [target]:
            cell = row[col_index[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"row {row_no}, column {name!r}: cannot parse {cell!r} as a number",
                                 row=row_no, column=name) from None
            if not np.isfinite(v):
                raise ParseError(f"row {row_no}, column {name!r}: non-finite value",
                                 row=row_no, column=name)
            values[name] = v
        rows_X.append([values[c] for c in covariates])
        rows_y.append(values[target])
    if len(rows_y) < 2:
        raise ParseError("need at least two data rows")
    return np.array(rows_X, dtype=float), np.array(rows_y, dtype=float), covariates


def read_matrix_csv(path, columns):
    """Read covariate columns (by name, in ``columns`` order) for prediction."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        missing = [c for c in columns if c not in header]
        if missing:
            raise DimensionMismatch(f"input lacks covariate columns {missing}")
        idx = [header.index(c) for c in columns]
        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            out = []
            for name, i in zip(columns, idx):
                try:
                    out.append(float(row[i]))
                except (ValueError, IndexError):
                    raise ParseError(f"row {row_no}, column {name!r}: cannot parse value",
                                     row=row_no, column=name) from None
            rows.append(out)
    return np.array(rows, dtype=float).reshape(-1, len(columns))


def _fmt(x):
    return format(float(x), ".17g")


def dumps_model(model, covariates=None):
    cfg = model.config
    diag = model.diagnostics
    lines = [f"{MAGIC} {FORMAT_VERSION}"]
    header = {
        "algorithm": cfg.algorithm,
        "config": json.dumps({k: getattr(cfg, k) for k in cfg.__dataclass_fields__}, sort_keys=True),
        "intercept": _fmt(model.intercept),
        "iterations": str(diag.iterations),
        "converged": str(int(diag.converged)),
        "degenerate_iterates": str(diag.degenerate_iterates),
        "covariates": json.dumps(list(covariates) if covariates is not None else None),
    }
    lines += [f"{k} = {v}" for k, v in header.items()]
    for name in _MATRICES:
        a = np.atleast_2d(getattr(model, name))
        if name in ("beta", "beta_sparse", "column_means", "column_scales"):
            a = a.reshape(-1, 1)
        lines.append(f"[{name}] {a.shape[0]} {a.shape[1]}")
        lines += [" ".join(_fmt(v) for v in row) for row in a]
    return "\n".join(lines) + "\n"


def loads_model(text):
    """Parse a model file. Returns ``(model, covariate_names or None)``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise ParseError("not an spcrsvd model file", row=1)
    version = lines[0].split()[1]
    if version != str(FORMAT_VERSION):
        raise ParseError(f"unsupported model file version {version}", row=1)
    header, blocks = {}, {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        key, _, value = lines[i].partition(" = ")
        header[key.strip()] = value
        i += 1
    while i < len(lines):
        tag = lines[i].split()
        try:
            name, r, c = tag[0][1:-1], int(tag[1]), int(tag[2])
            rows = [[float(v) for v in lines[i + 1 + j].split()] for j in range(r)]
            blocks[name] = np.array(rows, dtype=float).reshape(r, c)
        except (IndexError, ValueError):
            raise ParseError(f"malformed matrix block at line {i + 1}", row=i + 1) from None
        i += 1 + r
    try:
        cfg = FitConfig(**json.loads(header["config"]))
        diag = ConvergenceReport(
            iterations=int(header["iterations"]), primal_residuals=np.zeros((0, 2)),
            dual_residuals=np.zeros((0, 2)), objective_trace=np.zeros(0),
            converged=bool(int(header["converged"])),
            degenerate_iterates=int(header["degenerate_iterates"]),
        )
        model = SpcrsvdModel(
            intercept=float(header["intercept"]),
            beta=blocks["beta"].ravel(), V=blocks["V"], V_sparse=blocks["V_sparse"],
            Z=blocks["Z"], beta_sparse=blocks["beta_sparse"].ravel(),
            V_regression=blocks["V_regression"], diagnostics=diag, config=cfg,
            column_means=blocks["column_means"].ravel(),
            column_scales=blocks["column_scales"].ravel(),
        )
    except KeyError as exc:
        raise ParseError(f"model file lacks {exc.args[0]!r}") from None
    return model, json.loads(header.get("covariates", "null"))


def save_model(model, path, covariates=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model, covariates))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
