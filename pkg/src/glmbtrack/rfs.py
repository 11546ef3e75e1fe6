"""Labeled random-finite-set data model.

A delta-GLMB density is a weighted mixture of labeled multi-target
exponentials.  Each mixture component carries a finite label set, an opaque
association-history tag, and one weighted-particle density per label.  All
types here are immutable values; the operations are pure functions that
return new densities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

WEIGHT_TOL = 1e-9


class DegenerateDensityError(RuntimeError):
    """A density lost all of its probability mass."""


@dataclass(frozen=True, order=True)
class Label:
    """Track identity: birth time step plus ordinal within that step's birth model."""

    birth_time: int
    birth_index: int


@dataclass(frozen=True, eq=False)
class ParticleDensity:
    """Single-track spatial density represented by weighted particles.

    particles has shape (n, state_dim); weights has shape (n,) with
    nonnegative entries.  ``normalized`` enforces unit total weight.
    """

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if particles.shape[0] < 1:
            raise ValueError("particle density needs at least one particle")
        if particles.shape[0] != weights.shape[0]:
            raise ValueError("particle/weight count mismatch")
        if np.any(weights < 0.0):
            raise ValueError("negative particle weight")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.particles.shape[0]

    @property
    def state_dim(self) -> int:
        return self.particles.shape[1]

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def normalized(self) -> "ParticleDensity":
        total = self.total_weight()
        if total <= 0.0:
            raise DegenerateDensityError("particle weights sum to zero")
        return ParticleDensity(self.particles, self.weights / total)

    def mean(self) -> np.ndarray:
        """Weighted particle mean."""
        total = self.total_weight()
        if total <= 0.0:
            raise DegenerateDensityError("particle weights sum to zero")
        return (self.weights @ self.particles) / total

    def effective_sample_size(self) -> float:
        w = self.weights / self.total_weight()
        return 1.0 / float(np.sum(w * w))


@dataclass(frozen=True, eq=False)
class GlmbComponent:
    """One delta-GLMB mixture term: label set, history tag, weight, per-track densities."""

    labels: tuple[Label, ...]
    history: int
    weight: float
    track_densities: dict[Label, ParticleDensity]

    def __post_init__(self):
        labels = tuple(sorted(self.labels))
        if len(set(labels)) != len(labels):
            raise ValueError("component labels must be distinct")
        if set(self.track_densities) != set(labels):
            raise ValueError("track densities must cover the label set exactly")
        if not np.isfinite(self.weight) or self.weight < 0.0:
            raise ValueError(f"invalid component weight {self.weight}")
        object.__setattr__(self, "labels", labels)

    @property
    def cardinality(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class GlmbDensity:
    """Mixture of labeled multi-target exponentials."""

    components: tuple[GlmbComponent, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ValueError("a GLMB density needs at least one component")
        seen = set()
        for comp in components:
            key = (comp.labels, comp.history)
            if key in seen:
                raise ValueError(f"duplicate (labels, history) pair {key}")
            seen.add(key)
        object.__setattr__(self, "components", components)

    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def max_cardinality(self) -> int:
        return max(c.cardinality for c in self.components)


@dataclass(frozen=True)
class LabeledEstimate:
    """A point estimate for one track: label plus state vector."""

    label: Label
    state: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=float).ravel())


def empty_density(state_dim: int = 0, history: int = 0) -> GlmbDensity:
    """Density certain of an empty multi-target state (the usual initial prior)."""
    del state_dim  # tracked per-component once tracks exist
    return GlmbDensity((GlmbComponent(labels=(), history=history, weight=1.0,
                                      track_densities={}),))


def normalize(density: GlmbDensity) -> GlmbDensity:
    """Rescale component weights to sum to one, preserving order."""
    weights = density.weights()
    total = float(weights.sum())
    if total <= 0.0:
        raise DegenerateDensityError("all component weights are zero")
    components = tuple(
        GlmbComponent(c.labels, c.history, c.weight / total, c.track_densities)
        for c in density.components
    )
    return GlmbDensity(components)


def component_sort_key(component: GlmbComponent):
    """Deterministic ranking: weight descending, then history, then label set."""
    return (-component.weight, component.history, component.labels)


def truncate(density: GlmbDensity, max_components: int) -> GlmbDensity:
    """Keep the ``max_components`` highest-weight components and renormalize.

    Ties break toward the lower history tag, then the lexicographically
    smaller label set, so truncation is deterministic and idempotent.
    """
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    ranked = sorted(density.components, key=component_sort_key)
    return normalize(GlmbDensity(tuple(ranked[:max_components])))


def cardinality_distribution(density: GlmbDensity) -> np.ndarray:
    """Probability mass over target counts 0..max cardinality."""
    pmf = np.zeros(density.max_cardinality() + 1)
    for comp in density.components:
        pmf[comp.cardinality] += comp.weight
    return pmf


def extract_estimates(density: GlmbDensity) -> list[LabeledEstimate]:
    """MAP-cardinality multi-target estimator.

    Picks the most probable cardinality n* (ties toward smaller n), then the
    highest-weight component with exactly n* labels, and reports each of its
    tracks at the weighted particle mean.  Estimates come back in label order.
    """
    pmf = cardinality_distribution(density)
    n_star = int(np.argmax(pmf))
    candidates = [c for c in density.components if c.cardinality == n_star]
    best = min(candidates, key=component_sort_key)
    return [LabeledEstimate(label, best.track_densities[label].mean())
            for label in best.labels]


def debug_dump(density: GlmbDensity) -> str:
    """Structured-text summary: weight, labels, and per-track mean per component."""
    payload = []
    for comp in density.components:
        payload.append({
            "weight": float(comp.weight),
            "history": int(comp.history),
            "labels": [[lab.birth_time, lab.birth_index] for lab in comp.labels],
            "track_means": {
                f"({lab.birth_time},{lab.birth_index})":
                    [float(v) for v in comp.track_densities[lab].mean()]
                for lab in comp.labels
            },
        })
    return json.dumps(payload, indent=2)
