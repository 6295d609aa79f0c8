"""CSV ingestion and export for regression data and feature structure.

Dataset files have a header ``y,x_0001,...,x_p`` and one observation per
row. A companion structure file is either ``feature_id,group_id`` (groups)
or ``feature_id,u_1,...,u_q`` (covariates); feature and group ids are
1-based. Numbers are written with 17 significant digits so a write/read
round trip is exact.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .model import LinearDataset, PartitionError, SalassoError, StructureSpec, validate_dataset, validate_partition


class ParseError(SalassoError, ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = str(path), line, column
        where = f"{path}:{line}" + (f":{column}" if column is not None else "")
        super().__init__(f"{where}: {message}")


class SchemaError(SalassoError, ValueError):
    pass


def _g17(x) -> str:
    return format(float(x), ".17g")


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return rows[0], rows[1:]


def _floats(path, header, rows):
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != len(header):
            raise ParseError(path, line, None, f"row has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(path, line, j + 1, f"cannot parse {cell!r} as a number") from None
    return out


def write_regression_csv(path, X, y) -> None:
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x_{j + 1:04d}" for j in range(X.shape[1])])
        for yi, xi in zip(y, X):
            w.writerow([_g17(yi)] + [_g17(v) for v in xi])


def write_structure_csv(path, structure: StructureSpec, p: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if structure.kind == "group":
            labels = np.empty(p, int)
            for d, block in enumerate(structure.partition):
                labels[block] = d + 1
            w.writerow(["feature_id", "group_id"])
            for j in range(p):
                w.writerow([j + 1, labels[j]])
        elif structure.kind == "covariate":
            U = np.asarray(structure.U, float)
            U = U[:, None] if U.ndim == 1 else U
            w.writerow(["feature_id"] + [f"u_{k + 1}" for k in range(U.shape[1])])
            for j in range(p):
                w.writerow([j + 1] + [_g17(v) for v in U[j]])
        else:
            raise SchemaError("nothing to write for an unstructured spec")


def load_structure_csv(path, p: int) -> StructureSpec:
    header, rows = _read_rows(path)
    if not header or header[0] != "feature_id":
        raise SchemaError(f"{path}: first column must be 'feature_id'")
    data = _floats(path, header, rows)
    ids = data[:, 0]
    if not np.array_equal(ids, np.round(ids)):
        raise SchemaError(f"{path}: feature ids must be integers")
    ids = ids.astype(int) - 1
    if ids.size and (ids.min() < 0 or ids.max() >= p):
        raise SchemaError(f"{path}: feature ids must lie in 1..{p}")
    if header[1:] == ["group_id"]:
        gid = data[:, 1]
        if not np.array_equal(gid, np.round(gid)):
            raise SchemaError(f"{path}: group ids must be integers")
        gid = gid.astype(int)
        part = [ids[gid == g] for g in np.unique(gid)]
        try:
            part = validate_partition(part, p)
        except PartitionError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
        return StructureSpec("group", part)
    if header[1:] and all(h == f"u_{k + 1}" for k, h in enumerate(header[1:])):
        if np.unique(ids).size != ids.size or ids.size != p:
            raise SchemaError(f"{path}: covariate file needs each feature exactly once")
        U = np.empty((p, len(header) - 1))
        U[ids] = data[:, 1:]
        if not np.all(np.isfinite(U)):
            raise SchemaError(f"{path}: non-finite covariate")
        return StructureSpec("covariate", U=U)
    raise SchemaError(f"{path}: header must be feature_id,group_id or feature_id,u_1..u_q")


def load_regression_csv(path, structure_path=None, standardize: bool = False) -> Tuple[LinearDataset, Optional[StructureSpec]]:
    """Read a dataset and, optionally, its structure file.

    ``standardize`` centres ``y`` and each column and scales columns to unit
    Euclidean norm; by default the data are used as given.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "y" or any(h != f"x_{j + 1:04d}" for j, h in enumerate(header[1:])):
        raise SchemaError(f"{path}: header must be y,x_0001,...,x_p")
    if len(header) < 2:
        raise SchemaError(f"{path}: no feature columns")
    data = _floats(path, header, rows)
    y, X = data[:, 0], data[:, 1:]
    if standardize:
        y = y - y.mean()
        X = X - X.mean(axis=0)
        norms = np.linalg.norm(X, axis=0)
        X = X / np.where(norms > 0, norms, 1.0)
    ds = validate_dataset(LinearDataset(y, X))
    structure = load_structure_csv(structure_path, ds.p) if structure_path else None
    return ds, structure


def write_coefficients_csv(path, beta, weights=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature_id", "beta"] + (["weight"] if weights is not None else []))
        for j, b in enumerate(np.asarray(beta, float)):
            w.writerow([j + 1, _g17(b)] + ([_g17(weights[j])] if weights is not None else []))
