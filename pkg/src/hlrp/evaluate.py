"""Error metrics, rank reports and table exports."""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields

import numpy as np

from hlrp.errors import ShapeError
from hlrp.models import HyperLRPINN, nnz_ranks


@dataclass(frozen=True)
class MetricSet:
    abs_err: float
    rel_err: float
    max_err: float
    explained_var: float

    @classmethod
    def columns(cls):
        return tuple(f.name for f in fields(cls))

    def row(self):
        return astuple(self)


def metrics(u_ref, u_pred) -> MetricSet:
    """Mean absolute, relative L2, max error and explained variance (population)."""
    u = np.asarray(u_ref, dtype=np.float64).ravel()
    p = np.asarray(u_pred, dtype=np.float64).ravel()
    if u.shape != p.shape:
        raise ShapeError(f"length mismatch: {u.size} vs {p.size}")
    if u.size < 2:
        raise ShapeError("need at least two points")
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ZeroDivisionError("reference solution has zero norm")
    err = u - p
    var_u = np.var(u)
    var_e = np.var(err)
    if var_u == 0.0:
        # constant truth: only a constant error keeps the score defined
        ev = 1.0 if var_e == 0.0 else -np.inf
    else:
        ev = 1.0 - var_e / var_u
    return MetricSet(
        float(np.mean(np.abs(err))),
        float(np.linalg.norm(err) / norm),
        float(np.max(np.abs(err))),
        float(ev),
    )


def rank_report(model: HyperLRPINN, grid, eps=0.0):
    """Rows ``(mu..., r_1..r_L, phase-2 trainable count)`` per grid value."""
    rows = []
    io = sum(model.store[n].size for n in ("in.W", "in.b", "out.W", "out.b"))
    for mu in grid.vectors():
        ranks = nnz_ranks(model.hyper_forward(mu), eps)
        rows.append(tuple(mu.tolist()) + tuple(ranks) + (io + sum(ranks),))
    return rows


def rank_columns(model: HyperLRPINN, mu_names):
    return tuple(mu_names) + tuple(f"r{l + 1}" for l in range(model.arch.n_hidden)) + ("phase2_params",)


def diag_heatmap(model: HyperLRPINN, grid, layer: int) -> np.ndarray:
    """Coefficients of one layer, one row per grid value, sorted descending."""
    if not 0 <= layer < model.arch.n_hidden:
        raise IndexError(f"layer {layer} out of range")
    return np.array([np.sort(model.hyper_forward(mu)[layer])[::-1] for mu in grid.vectors()])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return "exhausted"
    return v


def comparison_table(results):
    """Rows of (mu, method, abs_err, rel_err) sorted by mu then method.

    ``results`` maps ``(mu, method)`` to a :class:`MetricSet`.
    """
    rows = []
    for (mu, method), m in sorted(results.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        rows.append((mu, method, m.abs_err, m.rel_err))
    return rows


def seed_summary(values):
    """Mean and population std over seeds."""
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())
