"""Collocation sets and PDE-parameter grids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hlrp.diffcore import make_rng
from hlrp.pde import TWO_PI, ProblemSpec, helmholtz_solution, initial_condition
from hlrp.reference import reference_field

# point budgets: (initial, boundary, interior, test)
CDR_COUNTS = (256, 100, 1000, 1000)
HELMHOLTZ_COUNTS = (0, 400, 1000, 10000)

TRAIN_STREAM, TEST_STREAM = 0, 1


@dataclass
class CollocationSet:
    """Training and test points for one PDE instance.

    Periodic problems pair each ``boundary`` point ``(0, t)`` with
    ``boundary_pair`` ``(2 pi, t)``; Dirichlet problems carry ``boundary_u``.
    """

    interior: np.ndarray
    boundary: np.ndarray
    test: np.ndarray
    test_u: np.ndarray
    initial: np.ndarray | None = None
    initial_u: np.ndarray | None = None
    boundary_pair: np.ndarray | None = None
    boundary_u: np.ndarray | None = None

    def counts(self) -> dict:
        return {
            "initial": 0 if self.initial is None else len(self.initial),
            "boundary": len(self.boundary),
            "interior": len(self.interior),
            "test": len(self.test),
        }

    def arrays(self) -> dict:
        return {k: v for k, v in vars(self).items() if v is not None}


def _train_points(spec: ProblemSpec, rng):
    (x0, x1), (y0, y1) = spec.domain
    if spec.family == "helmholtz":
        _, nb, ni, _ = HELMHOLTZ_COUNTS
        interior = np.column_stack([rng.uniform(x0, x1, ni), rng.uniform(y0, y1, ni)])
        per = nb // 4
        s = rng.uniform(-1.0, 1.0, (4, per))
        one = np.ones(per)
        boundary = np.vstack(
            [
                np.column_stack([-one, s[0]]),
                np.column_stack([one, s[1]]),
                np.column_stack([s[2], -one]),
                np.column_stack([s[3], one]),
            ]
        )
        return dict(
            interior=interior,
            boundary=boundary,
            boundary_u=helmholtz_solution(boundary[:, 0], boundary[:, 1], spec.params),
        )
    n0, nb, ni, _ = CDR_COUNTS
    interior = np.column_stack([rng.uniform(x0, x1, ni), rng.uniform(y0, y1, ni)])
    xi = rng.uniform(x0, x1, n0)
    tb = rng.uniform(y0, y1, nb)
    return dict(
        interior=interior,
        initial=np.column_stack([xi, np.zeros(n0)]),
        initial_u=initial_condition(spec, xi),
        boundary=np.column_stack([np.zeros(nb), tb]),
        boundary_pair=np.column_stack([np.full(nb, TWO_PI), tb]),
    )


def _test_points(spec: ProblemSpec, rng):
    field = reference_field(spec)
    if spec.family == "helmholtz":
        i, j = np.meshgrid(np.arange(field.axis0.size), np.arange(field.axis1.size), indexing="ij")
        i, j = i.ravel(), j.ravel()
    else:
        n = CDR_COUNTS[3]
        flat = rng.choice(field.values.size, size=n, replace=False)
        i, j = np.unravel_index(np.sort(flat), field.values.shape)
    return field.points(i, j), field.at_nodes(i, j)


def sample_collocation(spec: ProblemSpec, seed: int) -> CollocationSet:
    """Uniform random training points and reference-grid test nodes.

    Training draws come from one stream of ``seed`` and test draws from another;
    any training point that coincides with a test node is redrawn.
    """
    rng = make_rng(seed, TRAIN_STREAM)
    test, test_u = _test_points(spec, make_rng(seed, TEST_STREAM))
    test_keys = {tuple(p) for p in test}
    while True:
        train = _train_points(spec, rng)
        pts = [train["interior"], train["boundary"]]
        if "initial" in train:
            pts += [train["initial"], train["boundary_pair"]]
        if not any(tuple(p) in test_keys for arr in pts for p in arr):
            break
    return CollocationSet(test=test, test_u=test_u, **train)


@dataclass(frozen=True)
class ParamGrid:
    values: tuple
    role: str = "phase1-train"

    def __post_init__(self):
        if not self.values:
            raise ValueError("parameter grid is empty")
        keys = [tuple(np.atleast_1d(v).tolist()) for v in self.values]
        if len(set(keys)) != len(keys):
            raise ValueError("parameter grid has duplicate entries")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def vectors(self):
        return [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in self.values]


def param_grid(lo, hi, step, role="phase1-train") -> ParamGrid:
    """Arithmetic progression from ``lo``, including ``hi`` when reachable."""
    if step <= 0:
        raise ValueError("step must be positive")
    if lo > hi:
        raise ValueError("empty parameter grid: lo > hi")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    vals = tuple(float(np.round(lo + k * step, 10)) for k in range(n))
    return ParamGrid(vals, role)
