"""Sensor selection and dual-stage multi-sensor fusion.

Sensors are scored by the Cauchy-Schwarz divergence between the predicted
density and the posterior obtained from the sensor's predicted ideal
measurement set (PIMS): noiseless, clutter-free, perfectly detected
measurements of the currently estimated targets.  Greedy selection picks one
sensor per round against the fixed predicted density; exhaustive search
scores every ordered permutation through the full sequential update;
random selection is the uniform baseline.  Fusion applies the selected
sensors' real measurements as an iterated corrector, ranked by ascending
reward so that the most informative sensor corrects last.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .divergence import cs_divergence
from .filtering import FilterParams, update
from .radar import (MeasurementMessage, Measurement, RadarNetwork, Receiver,
                    ideal_measurement)
from .rfs import GlmbDensity, extract_estimates

# refuse exhaustive searches beyond this many ordered permutations
EXHAUSTIVE_PERMUTATION_GUARD = 10**6


class Strategy(Enum):
    GREEDY = "greedy"
    EXHAUSTIVE = "exhaustive"
    RANDOM = "random"


class ExhaustiveSearchError(RuntimeError):
    """The requested exhaustive search exceeds the permutation guard."""


@dataclass(frozen=True)
class SelectionResult:
    """Chosen sensors in selection order, their reward values, and the
    number of reward evaluations spent finding them."""

    ordered_sensors: tuple[int, ...]
    rewards: dict[int, float]
    evaluations: int

    def __post_init__(self):
        object.__setattr__(self, "ordered_sensors", tuple(self.ordered_sensors))
        missing = set(self.ordered_sensors) - set(self.rewards)
        if missing:
            raise ValueError(f"rewards missing for selected sensors {sorted(missing)}")


def pims(predicted: GlmbDensity, receiver: Receiver, transmitter,
         position_indices=(0, 1)) -> list[Measurement]:
    """Predicted ideal measurement set: one noise-free return per estimated target.

    Empty when the MAP cardinality of the predicted density is zero;
    measurements come back in label order.
    """
    idx = list(position_indices)
    estimates = extract_estimates(predicted)
    return [ideal_measurement(est.state[idx], receiver, transmitter)
            for est in estimates]


def reward(predicted: GlmbDensity, receiver: Receiver, network: RadarNetwork,
           params: FilterParams) -> float:
    """Information gain of one sensor: divergence from prior to PIMS posterior."""
    measurements = pims(predicted, receiver, network.transmitter,
                        network.position_indices)
    posterior = update(predicted, measurements, network.sensor_for(receiver), params)
    return cs_divergence(predicted, posterior)


def _sorted_candidates(candidates) -> list[Receiver]:
    return sorted(candidates, key=lambda r: r.id)


def select_greedy(predicted: GlmbDensity, candidates, num_select: int,
                  network: RadarNetwork, params: FilterParams) -> SelectionResult:
    """Sequential greedy selection of ``num_select`` sensors.

    Every round scores each not-yet-selected candidate against the same
    predicted density and takes the argmax, ties toward the lower receiver
    id.  Evaluations total sum_{j=0}^{P-1} (N_s - j).
    """
    pool = _sorted_candidates(candidates)
    if not 1 <= num_select <= len(pool):
        raise ValueError("num_select must lie in [1, number of candidates]")
    chosen: list[int] = []
    chosen_rewards: dict[int, float] = {}
    evaluations = 0
    for _ in range(num_select):
        best = None
        round_rewards = {}
        for receiver in pool:
            if receiver.id in chosen_rewards:
                continue
            value = reward(predicted, receiver, network, params)
            evaluations += 1
            round_rewards[receiver.id] = value
            if best is None or value > round_rewards[best]:
                best = receiver.id
        assert all(round_rewards[best] >= v for v in round_rewards.values())
        chosen.append(best)
        chosen_rewards[best] = round_rewards[best]
    return SelectionResult(tuple(chosen), chosen_rewards, evaluations)


def _pims_by_receiver(predicted, network, receivers):
    return {r.id: pims(predicted, r, network.transmitter, network.position_indices)
            for r in receivers}


def select_exhaustive(predicted: GlmbDensity, candidates, num_select: int,
                      network: RadarNetwork, params: FilterParams) -> SelectionResult:
    """Score every ordered permutation of ``num_select`` sensors.

    Each permutation is pushed through the full sequential PIMS update and
    scored once by the divergence between the predicted density and the
    fused posterior; evaluations total N_s! / (N_s - P)!.  Ties go to the
    earlier permutation in id-lexicographic order.
    """
    pool = _sorted_candidates(candidates)
    if not 1 <= num_select <= len(pool):
        raise ValueError("num_select must lie in [1, number of candidates]")
    count = math.perm(len(pool), num_select)
    if count > EXHAUSTIVE_PERMUTATION_GUARD:
        raise ExhaustiveSearchError(
            f"{count} ordered permutations exceed the guard "
            f"({EXHAUSTIVE_PERMUTATION_GUARD})")
    ideal_sets = _pims_by_receiver(predicted, network, pool)
    best_perm = None
    best_score = -math.inf
    evaluations = 0
    for perm in itertools.permutations(pool, num_select):
        fused = predicted
        for receiver in perm:
            fused = update(fused, ideal_sets[receiver.id],
                           network.sensor_for(receiver), params)
        score = cs_divergence(predicted, fused)
        evaluations += 1
        if score > best_score:
            best_score = score
            best_perm = tuple(r.id for r in perm)
    rewards = {rid: best_score for rid in best_perm}
    return SelectionResult(best_perm, rewards, evaluations)


def select_random(predicted: GlmbDensity, candidates, num_select: int,
                  network: RadarNetwork, params: FilterParams,
                  rng: np.random.Generator) -> SelectionResult:
    """Uniform random subset of ``num_select`` sensors.

    Rewards are still evaluated for the chosen sensors (the dual-stage
    ranking needs them), so evaluations equal ``num_select``.
    """
    pool = _sorted_candidates(candidates)
    if not 1 <= num_select <= len(pool):
        raise ValueError("num_select must lie in [1, number of candidates]")
    picks = rng.choice(len(pool), size=num_select, replace=False)
    chosen = [pool[int(i)] for i in picks]
    rewards = {r.id: reward(predicted, r, network, params) for r in chosen}
    return SelectionResult(tuple(r.id for r in chosen), rewards, len(chosen))


def iterated_corrector_fuse(predicted: GlmbDensity, sensor_order, message:
                            MeasurementMessage, network: RadarNetwork,
                            params: FilterParams,
                            diag: dict | None = None) -> GlmbDensity:
    """Sequential multi-sensor update in the given order.

    The first sensor corrects the predicted density; every later sensor
    corrects the previous posterior.
    """
    density = predicted
    discarded = 0.0
    for receiver_id in sensor_order:
        if receiver_id not in message.sets:
            raise ValueError(f"no measurement set for selected sensor {receiver_id}")
        step_diag: dict | None = {} if diag is not None else None
        density = update(density, message.sets[receiver_id],
                         network.sensor_for(receiver_id), params, diag=step_diag)
        if diag is not None:
            discarded = max(discarded, step_diag["discarded_mass"])
    if diag is not None:
        diag["discarded_mass"] = discarded
    return density


def dual_stage_fuse(predicted: GlmbDensity, selection: SelectionResult,
                    message: MeasurementMessage, network: RadarNetwork,
                    params: FilterParams, diag: dict | None = None) -> GlmbDensity:
    """Rank the selected sensors by ascending reward, then iterated-corrector fuse.

    The weakest sensor updates first so the stronger ones correct it; the
    sort is stable, so equal rewards preserve the selection order.
    """
    ranked = sorted(selection.ordered_sensors,
                    key=lambda rid: selection.rewards[rid])
    return iterated_corrector_fuse(predicted, ranked, message, network, params,
                                   diag=diag)
