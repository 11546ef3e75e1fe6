"""SMC delta-GLMB prediction and update with principled truncation.

Prediction enumerates (survival subset, birth subset) pairs per prior
component, ranked exactly by weight; with a constant survival probability
this best-subset enumeration returns the same top components a K-shortest
path search would.  The update enumerates ranked association maps per
component with Murty's algorithm on a track-by-measurement cost matrix that
includes one miss column per track.  Both operations keep the globally
highest-weight components, renormalize, and can report the discarded
probability mass.

Sensor objects are duck-typed: they need ``detection_prob(states)``,
``log_g(z, states)`` (both vectorized over an (n, dim) particle array) and
``kappa(z)``, the false-alarm reference density.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .motion import BirthModel, SurvivalModel, sample_birth
from .rfs import (DegenerateDensityError, GlmbComponent, GlmbDensity, Label,
                  ParticleDensity)

log = logging.getLogger(__name__)

# raw weights below exp(-LOG_FLOOR) are floored before taking logs
WEIGHT_FLOOR = 1e-300


@dataclass(frozen=True)
class AssociationMap:
    """Map from track label to measurement index, 0 meaning missed.

    Positive indices must be injective: two tracks cannot claim the same
    measurement.
    """

    assignments: dict[Label, int]

    def __post_init__(self):
        taken = [v for v in self.assignments.values() if v > 0]
        if len(set(taken)) != len(taken):
            raise ValueError("association map assigns one measurement twice")
        if any(v < 0 for v in self.assignments.values()):
            raise ValueError("measurement indices must be nonnegative")


@dataclass(frozen=True)
class FilterParams:
    max_components: int = 1000
    k_best_assignments: int = 100
    resample_threshold: float = 0.5

    def __post_init__(self):
        if self.max_components < 1 or self.k_best_assignments < 1:
            raise ValueError("component/assignment budgets must be positive")
        if not 0.0 <= self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold is a fraction of the particle count")


# ---------------------------------------------------------------------------
# ranked assignment


def _solve_assignment(cost: np.ndarray):
    """Optimal one-to-one row->column assignment; None if infeasible.

    np.inf entries are forbidden cells.
    """
    n, m = cost.shape
    finite = np.isfinite(cost)
    if not finite.any(axis=1).all():
        return None
    big = (np.abs(cost[finite]).max() + 1.0) * (n + 1) if finite.any() else 1.0
    work = np.where(finite, cost, big)
    rows, cols = linear_sum_assignment(work)
    order = np.argsort(rows)
    cols = cols[order]
    if not finite[np.arange(n), cols].all():
        return None
    return tuple(int(c) for c in cols), float(cost[np.arange(n), cols].sum())


def murty_k_best(cost_matrix, k: int) -> list[tuple[tuple[int, ...], float]]:
    """The k lowest-cost one-to-one assignments of rows to columns.

    Accepts rectangular matrices with at least as many columns as rows;
    np.inf marks forbidden cells.  Returns (columns, cost) pairs sorted by
    nondecreasing cost with no duplicates; fewer than k come back when fewer
    feasible assignments exist.
    """
    cost = np.asarray(cost_matrix, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    n, m = cost.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 0:
        return [((), 0.0)]
    if n > m:
        return []
    first = _solve_assignment(cost)
    if first is None:
        return []
    solutions: list[tuple[tuple[int, ...], float]] = []
    counter = itertools.count()
    heap = [(first[1], next(counter), cost, first[0])]
    while heap and len(solutions) < k:
        total, _, problem, cols = heapq.heappop(heap)
        solutions.append((cols, total))
        # Murty partition: child i forbids pair i of this solution while
        # keeping pairs 0..i-1 forced; the children tile the remaining space.
        forced = problem.copy()
        for row in range(n):
            child = forced.copy()
            child[row, cols[row]] = np.inf
            solved = _solve_assignment(child)
            if solved is not None:
                heapq.heappush(heap, (solved[1], next(counter), child, solved[0]))
            kept = forced[row, cols[row]]
            forced[row, :] = np.inf
            forced[:, cols[row]] = np.inf
            forced[row, cols[row]] = kept
    return solutions


# ---------------------------------------------------------------------------
# best-subset enumeration (prediction truncation)


def _k_best_flip_sets(penalties: list[float], k: int):
    """k lowest-total subsets of nonnegative penalties (sorted ascending).

    Yields (flip index tuple, total penalty) in nondecreasing total order,
    starting with the empty set.  Infinite penalties and their supersets are
    skipped.
    """
    results = [((), 0.0)]
    n = len(penalties)
    heap = []
    if n and math.isfinite(penalties[0]):
        heapq.heappush(heap, (penalties[0], (0,)))
    while heap and len(results) < k:
        total, flips = heapq.heappop(heap)
        results.append((flips, total))
        last = flips[-1]
        if last + 1 < n:
            grown = total + penalties[last + 1]
            if math.isfinite(grown):
                heapq.heappush(heap, (grown, flips + (last + 1,)))
            swapped = total - penalties[last] + penalties[last + 1]
            if math.isfinite(swapped):
                heapq.heappush(heap, (swapped, flips[:-1] + (last + 1,)))
    return results[:k]


def _best_subsets(log_include, log_exclude, k: int):
    """Top-k subsets S of {0..n-1} ranked by sum(log_include[S]) + sum(log_exclude[rest]).

    Returns (included index tuple, log weight) sorted by weight descending.
    """
    n = len(log_include)
    base_member = [log_include[i] >= log_exclude[i] for i in range(n)]
    base_logw = sum(max(log_include[i], log_exclude[i]) for i in range(n))
    penalties = sorted(
        ((abs(log_include[i] - log_exclude[i]), i) for i in range(n)),
    )
    out = []
    for flips, total in _k_best_flip_sets([p for p, _ in penalties], k):
        flipped = {penalties[j][1] for j in flips}
        included = tuple(i for i in range(n) if base_member[i] != (i in flipped))
        logw = base_logw - total
        if math.isfinite(logw):
            out.append((included, logw))
    return out


def _k_best_pairs(list_a, list_b, k: int):
    """Top-k (i, j, logw_i + logw_j) over two descending (item, logw) lists."""
    if not list_a or not list_b:
        return []
    heap = [(-(list_a[0][1] + list_b[0][1]), 0, 0)]
    seen = {(0, 0)}
    out = []
    while heap and len(out) < k:
        neg, i, j = heapq.heappop(heap)
        out.append((i, j, -neg))
        for i2, j2 in ((i + 1, j), (i, j + 1)):
            if i2 < len(list_a) and j2 < len(list_b) and (i2, j2) not in seen:
                seen.add((i2, j2))
                heapq.heappush(heap, (-(list_a[i2][1] + list_b[j2][1]), i2, j2))
    return out


# ---------------------------------------------------------------------------
# prediction


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def predict(prior: GlmbDensity, birth: BirthModel, survival: SurvivalModel,
            motion, params: FilterParams, rng: np.random.Generator, *,
            time: int, diag: dict | None = None) -> GlmbDensity:
    """One delta-GLMB prediction step.

    Per prior component, surviving-track particle clouds are pushed through
    the motion model and (survival subset, birth subset) pairs are enumerated
    in exact weight order; the globally best ``max_components`` predicted
    components are kept and renormalized.  ``time`` stamps this step's birth
    labels.  When ``diag`` is a dict, the discarded raw probability mass is
    stored under ``"discarded_mass"``.
    """
    birth_tracks = sample_birth(birth, time, rng)
    log_b_in = [_safe_log(w) for _, _, w in birth_tracks]
    log_b_out = [_safe_log(1.0 - w) for _, _, w in birth_tracks]
    birth_subsets = _best_subsets(log_b_in, log_b_out, 2 ** len(birth_tracks))

    log_ps = _safe_log(survival.p_s)
    log_qs = _safe_log(1.0 - survival.p_s)

    candidates = []  # (log raw weight, labels, track densities)
    for comp in prior.components:
        if comp.weight <= 0.0:
            continue
        budget = max(1, math.ceil(comp.weight * params.max_components))
        labels = comp.labels
        if any(lab.birth_time == time for lab in labels):
            raise ValueError("birth labels would collide with surviving labels")
        moved = {
            lab: ParticleDensity(motion.propagate(d.particles, rng), d.weights)
            for lab, d in ((lab, comp.track_densities[lab]) for lab in labels)
        }
        survival_subsets = _best_subsets([log_ps] * len(labels),
                                         [log_qs] * len(labels), budget)
        log_w_comp = _safe_log(comp.weight)
        for si, bi, logw in _k_best_pairs(survival_subsets, birth_subsets, budget):
            kept_idx = survival_subsets[si][0]
            birth_idx = birth_subsets[bi][0]
            new_labels = tuple(labels[i] for i in kept_idx) \
                + tuple(birth_tracks[i][0] for i in birth_idx)
            tracks = {labels[i]: moved[labels[i]] for i in kept_idx}
            tracks.update({birth_tracks[i][0]: birth_tracks[i][1]
                           for i in birth_idx})
            candidates.append((log_w_comp + logw, new_labels, tracks))

    return _assemble(candidates, params.max_components, diag)


# ---------------------------------------------------------------------------
# update


class _TrackEval:
    """Per-track sensor evaluation shared across components via object identity."""

    __slots__ = ("pd", "g", "eta_miss", "eta_det")

    def __init__(self, density: ParticleDensity, measurements, sensor, kappas):
        w = density.weights
        self.pd = np.asarray(sensor.detection_prob(density.particles), dtype=float)
        self.eta_miss = float(w @ (1.0 - self.pd))
        if measurements:
            self.g = np.exp(np.stack(
                [sensor.log_g(z, density.particles) for z in measurements], axis=1))
            self.eta_det = (w * self.pd) @ self.g / kappas
        else:
            self.g = np.zeros((density.count, 0))
            self.eta_det = np.zeros(0)


def _systematic_resample(density: ParticleDensity) -> ParticleDensity:
    """Deterministic systematic resampling to uniform weights.

    A fixed half-step offset keeps the update free of sampling noise, which
    in turn keeps the whole update operation deterministic.
    """
    n = density.count
    w = density.weights / density.total_weight()
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    picks = np.searchsorted(cdf, (np.arange(n) + 0.5) / n)
    return ParticleDensity(density.particles[picks], np.full(n, 1.0 / n))


def _posterior_track(density: ParticleDensity, evals: _TrackEval, meas_index: int,
                     params: FilterParams) -> ParticleDensity:
    """Reweight one track by its association and resample when degenerate."""
    if meas_index == 0:
        factors = 1.0 - evals.pd
    else:
        factors = evals.pd * evals.g[:, meas_index - 1]
    reweighted = ParticleDensity(density.particles,
                                 density.weights * factors).normalized()
    threshold = params.resample_threshold * reweighted.count
    if reweighted.effective_sample_size() < threshold:
        return _systematic_resample(reweighted)
    return reweighted


def update(predicted: GlmbDensity, measurements, sensor, params: FilterParams,
           diag: dict | None = None) -> GlmbDensity:
    """One delta-GLMB Bayes update against a single sensor's measurement set.

    Per component, a |labels| x (|Z| + |labels|) cost matrix holds the
    negative-log association weights (detection columns followed by one miss
    column per track); Murty's algorithm enumerates the component's best
    association maps, with the assignment budget split across components in
    proportion to their weights.  Posterior components are reweighted,
    resampled where the effective sample size collapses, truncated globally,
    and renormalized.  An empty measurement list performs the pure miss
    update.
    """
    Z = list(measurements)
    kappas = np.array([float(sensor.kappa(z)) for z in Z])
    if np.any(kappas <= 0.0):
        raise ValueError("false-alarm reference density must be positive")
    eval_cache: dict[int, tuple[ParticleDensity, _TrackEval]] = {}

    def track_eval(density: ParticleDensity) -> _TrackEval:
        key = id(density)
        hit = eval_cache.get(key)
        if hit is None:
            hit = (density, _TrackEval(density, Z, sensor, kappas))
            eval_cache[key] = hit
        return hit[1]

    candidates = []  # (log raw weight, labels, association cols, parent)
    for comp in predicted.components:
        if comp.weight <= 0.0:
            continue
        n_t = comp.cardinality
        log_w = math.log(comp.weight)
        if n_t == 0:
            candidates.append((log_w, comp, ()))
            continue
        cost = np.full((n_t, len(Z) + n_t), np.inf)
        for i, lab in enumerate(comp.labels):
            evals = track_eval(comp.track_densities[lab])
            if len(Z):
                detect = -np.log(np.maximum(evals.eta_det, WEIGHT_FLOOR))
                detect[evals.eta_det <= 0.0] = np.inf
                cost[i, :len(Z)] = detect
            if evals.eta_miss > 0.0:
                cost[i, len(Z) + i] = -math.log(max(evals.eta_miss, WEIGHT_FLOOR))
        budget = max(1, math.ceil(comp.weight * params.k_best_assignments))
        for cols, total_cost in murty_k_best(cost, budget):
            candidates.append((log_w - total_cost, comp, cols))

    posterior = []
    for logw, comp, cols in candidates:
        theta = AssociationMap({
            lab: (cols[i] + 1 if cols[i] < len(Z) else 0)
            for i, lab in enumerate(comp.labels)
        })
        tracks = {
            lab: _posterior_track(comp.track_densities[lab],
                                  track_eval(comp.track_densities[lab]),
                                  theta.assignments[lab], params)
            for lab in comp.labels
        }
        posterior.append((logw, comp.labels, tracks))
    return _assemble(posterior, params.max_components, diag)


def _assemble(candidates, max_components: int, diag: dict | None) -> GlmbDensity:
    """Rank raw candidates, truncate, renormalize, and report discarded mass."""
    finite = [(logw, labels, tracks) for logw, labels, tracks in candidates
              if math.isfinite(logw)]
    if not finite:
        raise DegenerateDensityError("no component retained any probability mass")
    finite.sort(key=lambda item: -item[0])
    peak = finite[0][0]
    raw = np.exp(np.array([logw for logw, _, _ in finite]) - peak)
    kept = finite[:max_components]
    kept_mass = float(raw[:max_components].sum())
    total_mass = float(raw.sum())
    discarded = 1.0 - kept_mass / total_mass
    if diag is not None:
        diag["discarded_mass"] = discarded
    if discarded > 0.1:
        log.debug("truncation discarded %.3f of enumerated mass", discarded)
    weights = raw[:max_components] / kept_mass
    components = tuple(
        GlmbComponent(labels, index, float(w), tracks)
        for index, ((_, labels, tracks), w) in enumerate(zip(kept, weights))
    )
    return GlmbDensity(components)
