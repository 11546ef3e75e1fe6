"""OSPA multi-target error metric and its optimal-assignment core."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaParams:
    """Order p weights outliers, cutoff c (m) caps per-point and cardinality penalties."""

    order: float = 1.0
    cutoff: float = 200.0

    def __post_init__(self):
        if self.order < 1.0:
            raise ValueError("order must be >= 1")
        if self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive")


class OspaResult(NamedTuple):
    total: float
    localization: float
    cardinality: float


def hungarian(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect assignment of a square matrix.

    Returns (columns, total) where columns[i] is the column assigned to row i.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("hungarian expects a square cost matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("hungarian expects finite costs")
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(rows)
    cols = cols[order]
    return cols, float(cost[np.arange(cost.shape[0]), cols].sum())


def ospa(x_points, y_points, params: OspaParams = OspaParams()) -> OspaResult:
    """OSPA distance between two planar point sets, split into its two penalties.

    total^p = (1/n) * (min-assignment sum of min(c, d)^p + c^p * (n - m))
    with m <= n the two cardinalities; localization and cardinality are the
    corresponding sub-terms, all reported in metres.
    """
    x = np.asarray(x_points, dtype=float).reshape(-1, 2) if len(x_points) else \
        np.empty((0, 2))
    y = np.asarray(y_points, dtype=float).reshape(-1, 2) if len(y_points) else \
        np.empty((0, 2))
    if x.shape[0] == 0 and y.shape[0] == 0:
        return OspaResult(0.0, 0.0, 0.0)
    c, p = params.cutoff, params.order
    if x.shape[0] == 0 or y.shape[0] == 0:
        return OspaResult(c, 0.0, c)
    if x.shape[0] > y.shape[0]:
        x, y = y, x
    m, n = x.shape[0], y.shape[0]
    dist = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    cost = np.minimum(dist, c) ** p
    # pad to square with constant-c^p rows for the unmatched points
    padded = np.full((n, n), c**p)
    padded[:m, :] = cost
    _, assignment_cost = hungarian(padded)
    loc_cost = assignment_cost - (n - m) * c**p
    total = ((loc_cost + (n - m) * c**p) / n) ** (1.0 / p)
    localization = (loc_cost / n) ** (1.0 / p)
    cardinality = ((n - m) * c**p / n) ** (1.0 / p)
    return OspaResult(float(total), float(localization), float(cardinality))
