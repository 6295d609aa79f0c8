"""Estimation, selection and prediction metrics plus the replicate-level record."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, List

import numpy as np

from .model import DimensionMismatch


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def mse(beta_hat, beta0) -> float:
    """Per-coordinate squared error ``||beta_hat - beta0||^2 / p``."""
    a, b = _pair(np.asarray(beta_hat, float), np.asarray(beta0, float))
    d = a - b
    return float(d @ d / d.size)


def mcc(support_hat, support_true) -> float:
    """Matthews correlation of two boolean supports; 0 if a margin is empty."""
    h, t = _pair(np.asarray(support_hat, bool), np.asarray(support_true, bool))
    tp = int(np.sum(h & t))
    tn = int(np.sum(~h & ~t))
    fp = int(np.sum(h & ~t))
    fn = int(np.sum(~h & t))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def rmspe(y_test, y_pred) -> float:
    a, b = _pair(np.asarray(y_test, float), np.asarray(y_pred, float))
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class MetricsRow:
    method: str
    replication: int
    delta: float
    lam: float = float("nan")
    gamma: float = float("nan")
    mse: float = float("nan")
    rmspe: float = float("nan")
    mcc: float = float("nan")
    wall_time_ms: float = float("nan")
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("extra"))
        d["lambda"] = d.pop("lam")
        return d


_BASE = ["method", "replication", "delta", "lambda", "gamma", "mse", "rmspe", "mcc", "wall_time_ms", "seed"]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_metrics_csv(path, rows: Iterable[MetricsRow]) -> List[str]:
    """Write rows in the given order; extra keys follow the base columns in first-seen order."""
    rows = [r.as_dict() for r in rows]
    cols = list(_BASE)
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    return cols


def read_metrics_csv(path) -> List[dict]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                try:
                    row[k] = float(v) if k not in ("method",) else v
                except ValueError:
                    row[k] = v
            out.append(row)
    return out


def summarize(rows: Iterable[MetricsRow], group_keys=("method", "delta")) -> dict:
    """Mean and standard error of every numeric column, per group.

    Groups are keyed by ``group_keys`` joined with ``|``.
    """
    groups = {}
    for r in rows:
        d = r.as_dict()
        key = "|".join(str(d[k]) for k in group_keys)
        groups.setdefault(key, []).append(d)
    out = {}
    for key, items in groups.items():
        stats = {"n": len(items)}
        for col in items[0]:
            if col in group_keys or col in ("replication", "seed"):
                continue
            vals = np.array([it.get(col, np.nan) for it in items], dtype=float) if _numeric(items, col) else None
            if vals is None:
                continue
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
            stats[col] = {"mean": mean, "se": se}
        out[key] = stats
    return out


def _numeric(items, col):
    return all(isinstance(it.get(col), (int, float, np.integer, np.floating)) and not isinstance(it.get(col), bool) for it in items)


def write_summary_json(path, summary: dict, **meta) -> None:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (float, np.floating)):
            return None if not np.isfinite(x) else float(x)
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, np.ndarray):
            return clean(x.tolist())
        return x

    with open(path, "w") as fh:
        json.dump(clean({"meta": meta, "summary": summary}), fh, indent=2, sort_keys=True)
