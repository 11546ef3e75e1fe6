"""Independent brute-force checkers used by the test suite and the CLI.

These deliberately avoid the library's own algorithms: assignments are
enumerated exhaustively, Gaussian inner products are evaluated by adaptive
quadrature, and the Kalman update is written out in closed form.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate


def enumerate_assignments(cost_matrix, k: int | None = None):
    """All feasible one-to-one row->column assignments by exhaustive enumeration.

    Returns (columns, cost) pairs sorted by (cost, columns); ``k`` optionally
    truncates the list.  np.inf cells are forbidden.
    """
    cost = np.asarray(cost_matrix, dtype=float)
    n, m = cost.shape
    out = []
    for cols in itertools.permutations(range(m), n):
        values = cost[np.arange(n), list(cols)]
        if np.all(np.isfinite(values)):
            out.append((tuple(cols), float(values.sum())))
    out.sort(key=lambda item: (item[1], item[0]))
    return out[:k] if k is not None else out


def _gauss_pdf(x, mean, cov_inv, norm):
    diff = np.asarray(x, dtype=float) - mean
    return norm * math.exp(-0.5 * float(diff @ cov_inv @ diff))


def quadrature_gaussian_inner_product(mean_a, cov_a, mean_b, cov_b) -> float:
    """Numerical integral of the product of two Gaussian densities (1-D or 2-D)."""
    mean_a = np.atleast_1d(np.asarray(mean_a, dtype=float))
    mean_b = np.atleast_1d(np.asarray(mean_b, dtype=float))
    cov_a = np.atleast_2d(np.asarray(cov_a, dtype=float))
    cov_b = np.atleast_2d(np.asarray(cov_b, dtype=float))
    dim = mean_a.size
    inv_a, inv_b = np.linalg.inv(cov_a), np.linalg.inv(cov_b)
    norm_a = 1.0 / math.sqrt((2.0 * math.pi) ** dim * np.linalg.det(cov_a))
    norm_b = 1.0 / math.sqrt((2.0 * math.pi) ** dim * np.linalg.det(cov_b))
    # integrate over a box wide enough that the truncated tails are negligible
    spread = 8.0 * np.sqrt(np.maximum(np.diag(cov_a), np.diag(cov_b)))
    lo = np.minimum(mean_a, mean_b) - spread
    hi = np.maximum(mean_a, mean_b) + spread
    if dim == 1:
        value, _ = integrate.quad(
            lambda x: _gauss_pdf([x], mean_a, inv_a, norm_a)
            * _gauss_pdf([x], mean_b, inv_b, norm_b),
            lo[0], hi[0], epsabs=1e-14, epsrel=1e-10, limit=200)
        return value
    if dim == 2:
        value, _ = integrate.dblquad(
            lambda y, x: _gauss_pdf([x, y], mean_a, inv_a, norm_a)
            * _gauss_pdf([x, y], mean_b, inv_b, norm_b),
            lo[0], hi[0], lo[1], hi[1], epsabs=1e-12, epsrel=1e-9)
        return value
    raise ValueError("quadrature oracle supports 1-D and 2-D only")


def kalman_update_1d(prior_mean: float, prior_var: float, z: float,
                     meas_var: float) -> tuple[float, float]:
    """Scalar Kalman measurement update for z = x + v, v ~ N(0, meas_var)."""
    gain = prior_var / (prior_var + meas_var)
    mean = prior_mean + gain * (z - prior_mean)
    var = (1.0 - gain) * prior_var
    return mean, var
