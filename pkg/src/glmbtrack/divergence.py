"""Closed-form Cauchy-Schwarz divergence between two GLMB densities.

The divergence is -ln of the normalized cross inner product of the two
mixtures.  Mixture inner products decompose over components sharing an
identical label set, with one Gaussian-Gaussian inner product per shared
label.  Particle track densities are moment-matched to single Gaussians
first, which makes every inner product exact and the reward deterministic;
this surrogate is an artifact approximation and is documented as such.

On units: per-label inner products are rendered dimensionless by the
hypervolume unit of the caller's coordinate system, so the returned value
does not depend on the numeric unit choice at all.  Rescaling the state
space and the unit together leaves every per-label factor, and hence the
divergence, unchanged.
"""

from __future__ import annotations

import math
import weakref
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .rfs import DegenerateDensityError, GlmbDensity, ParticleDensity

LOG_2PI = math.log(2.0 * math.pi)

# covariance regularizer for moment matching, in squared SI units
COV_REGULARIZER = 1e-6

_summary_cache: "weakref.WeakKeyDictionary[ParticleDensity, GaussianSummary]" = \
    weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class GaussianSummary:
    """Moment-matched single-Gaussian surrogate of a track density."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape mismatch")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class HypervolumeUnit:
    """Unit of state-space hypervolume used to nondimensionalize inner products."""

    K: float = 1.0

    def __post_init__(self):
        if self.K <= 0.0:
            raise ValueError("hypervolume unit must be positive")


def moment_match(p: ParticleDensity) -> GaussianSummary:
    """Weighted mean and covariance of a particle cloud, regularized to stay SPD.

    A single particle (or a cloud collapsed onto one point) yields a point
    mass with the bare regularizer as covariance.  Results are cached per
    particle-density object since densities are immutable.
    """
    cached = _summary_cache.get(p)
    if cached is not None:
        return cached
    total = p.total_weight()
    if total <= 0.0:
        raise DegenerateDensityError("cannot moment-match zero-mass particles")
    w = p.weights / total
    mean = w @ p.particles
    centered = p.particles - mean
    cov = (centered * w[:, None]).T @ centered
    cov = cov + COV_REGULARIZER * np.eye(p.state_dim)
    summary = GaussianSummary(mean, cov)
    _summary_cache[p] = summary
    return summary


def gaussian_inner_product(a: GaussianSummary, b: GaussianSummary) -> float:
    """Integral of the product of two Gaussian densities: N(m_a; m_b, P_a + P_b)."""
    s = a.covariance + b.covariance
    diff = a.mean - b.mean
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        raise ValueError("covariance sum is not positive definite")
    quad = float(diff @ np.linalg.solve(s, diff))
    return math.exp(-0.5 * (quad + logdet + diff.size * LOG_2PI))


def _grouped_summaries(density: GlmbDensity):
    """Group components by label set: label set -> (weights, means, covs)."""
    groups = defaultdict(lambda: ([], [], []))
    for comp in density.components:
        summaries = [moment_match(comp.track_densities[lab]) for lab in comp.labels]
        ws, ms, cs = groups[comp.labels]
        ws.append(comp.weight)
        ms.append([s.mean for s in summaries])
        cs.append([s.covariance for s in summaries])
    out = {}
    for labels, (ws, ms, cs) in groups.items():
        n_labels = len(labels)
        if n_labels:
            dim = ms[0][0].size
            means = np.array(ms).reshape(len(ws), n_labels, dim)
            covs = np.array(cs).reshape(len(ws), n_labels, dim, dim)
        else:
            means = np.empty((len(ws), 0, 1))
            covs = np.empty((len(ws), 0, 1, 1))
        out[labels] = (np.array(ws), means, covs)
    return out


def _group_cross_inner(weights_a, means_a, covs_a, weights_b, means_b, covs_b) -> float:
    """Sum over component pairs of w_a * w_b * prod over labels of Gaussian inner products."""
    if means_a.shape[1] == 0:
        return float(weights_a.sum() * weights_b.sum())
    s = covs_a[:, None] + covs_b[None, :]
    diff = means_a[:, None] - means_b[None, :]
    sign, logdet = np.linalg.slogdet(s)
    if np.any(sign <= 0):
        raise ValueError("covariance sum is not positive definite")
    solved = np.linalg.solve(s, diff[..., None])[..., 0]
    quad = np.einsum("abld,abld->abl", diff, solved)
    dim = means_a.shape[2]
    log_ip = -0.5 * (quad + logdet + dim * LOG_2PI)
    pair_products = np.exp(log_ip.sum(axis=2))
    return float(weights_a @ pair_products @ weights_b)


def _mixture_inner_product(groups_a, groups_b) -> float:
    total = 0.0
    for labels, (wa, ma, ca) in groups_a.items():
        hit = groups_b.get(labels)
        if hit is None:
            continue
        wb, mb, cb = hit
        total += _group_cross_inner(wa, ma, ca, wb, mb, cb)
    return total


def cs_divergence(a: GlmbDensity, b: GlmbDensity,
                  unit: HypervolumeUnit = HypervolumeUnit()) -> float:
    """Cauchy-Schwarz divergence -ln(<a,b> / sqrt(<a,a><b,b>)) between two GLMBs.

    Component pairs with differing label sets contribute nothing; per shared
    label the factor is the (unit-nondimensionalized) inner product of the
    moment-matched track Gaussians.  Zero for identical densities, symmetric,
    nonnegative, and invariant to the hypervolume unit.
    """
    del unit  # validated at construction; the value is unit-invariant
    if a is b:
        return 0.0
    groups_a = _grouped_summaries(a)
    groups_b = _grouped_summaries(b)
    self_a = _mixture_inner_product(groups_a, groups_a)
    self_b = _mixture_inner_product(groups_b, groups_b)
    if self_a <= 0.0 or self_b <= 0.0:
        raise DegenerateDensityError("zero self inner product")
    cross = _mixture_inner_product(groups_a, groups_b)
    if cross <= 0.0:
        return math.inf
    value = -(math.log(cross) - 0.5 * math.log(self_a) - 0.5 * math.log(self_b))
    return max(0.0, value)
