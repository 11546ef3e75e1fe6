"""Scenario configuration, ground truth, and the Monte-Carlo experiment runner.

Configs are plain JSON with a versioned schema; the two shipped scenario
builders reproduce the published parameter blocks at desk scale (receiver
coordinates and exact trajectories are not recoverable from the source
figures, so the defaults here are documented substitutes and experiments
compare strategies rather than absolute error curves).

Each trial derives its own random stream from ``base_seed + trial_index``
(one sub-stream for truth, one for the filter), so results are bit-identical
across runs and across sequential/parallel execution.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np

from .filtering import FilterParams, predict, update
from .metrics import OspaParams, OspaResult, ospa
from .motion import BirthModel, BirthTerm, CtModel, CvModel, SurvivalModel
from .radar import (ClutterModel, DetectionModel, MeasurementMessage,
                    NoiseModel, RadarNetwork, Receiver, Transmitter,
                    default_network, generate_measurement_set)
from .rfs import DegenerateDensityError, LabeledEstimate, empty_density, \
    extract_estimates
from .selection import (SelectionResult, Strategy, dual_stage_fuse,
                        iterated_corrector_fuse, select_exhaustive,
                        select_greedy, select_random)

SCHEMA_VERSION = 1

UPDATE_ORDERS = ("ranked", "random", "as_selected")


class ConfigError(ValueError):
    """A scenario configuration is malformed."""


@dataclass(frozen=True)
class TruthTarget:
    """Scripted target: birth step, initial state, optional death, turn schedule."""

    target_id: int
    birth_step: int
    initial_state: np.ndarray
    death_step: int | None = None
    turn_segments: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "initial_state",
                           np.asarray(self.initial_state, dtype=float).ravel())
        object.__setattr__(self, "turn_segments",
                           tuple((int(s), float(w)) for s, w in self.turn_segments))

    def turn_rate_at(self, step: int) -> float:
        rate = 0.0
        for start, omega in self.turn_segments:
            if step >= start:
                rate = omega
        return rate

    def alive_at(self, step: int, duration: int) -> bool:
        death = self.death_step if self.death_step is not None else duration + 1
        return self.birth_step <= step < death


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    duration: int
    motion: CtModel | CvModel
    birth: BirthModel
    survival: SurvivalModel
    network: RadarNetwork
    filter_params: FilterParams
    strategy: Strategy
    num_sensors: int
    update_order: str
    ospa_params: OspaParams
    mc_trials: int
    base_seed: int
    truth: tuple[TruthTarget, ...]

    def __post_init__(self):
        if self.duration < 1:
            raise ConfigError("duration must be >= 1")
        if self.mc_trials < 1:
            raise ConfigError("mc_trials must be >= 1")
        if not 1 <= self.num_sensors <= len(self.network.receivers):
            raise ConfigError("num_sensors must lie in [1, receiver count]")
        if self.update_order not in UPDATE_ORDERS:
            raise ConfigError(f"update_order must be one of {UPDATE_ORDERS}")
        for target in self.truth:
            death = target.death_step if target.death_step is not None \
                else self.duration + 1
            if not target.birth_step < death <= self.duration + 1:
                raise ConfigError(
                    f"target {target.target_id}: need birth < death <= duration + 1")
        object.__setattr__(self, "truth", tuple(self.truth))

    @property
    def dt(self) -> float:
        return self.motion.dt


@dataclass(frozen=True)
class StepRecord:
    step: int
    estimates: tuple[LabeledEstimate, ...]
    ospa: OspaResult
    selected: tuple[int, ...]
    rewards: tuple[float, ...]
    evaluations: int
    truncation_mass: float


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    records: tuple[StepRecord, ...]
    error: str | None = None
    wall_time: float = 0.0
    total_evaluations: int = 0

    def time_averaged_ospa(self) -> float:
        return float(np.mean([r.ospa.total for r in self.records]))


@dataclass(frozen=True)
class ExperimentReport:
    config: ScenarioConfig
    trials: tuple[TrialResult, ...]

    def ok(self) -> bool:
        return all(t.error is None for t in self.trials)

    def per_step_mean_ospa(self) -> np.ndarray:
        return np.array([
            np.mean([t.records[k].ospa.total for t in self.trials])
            for k in range(self.config.duration)
        ])

    def mean_time_averaged_ospa(self) -> float:
        return float(np.mean([t.time_averaged_ospa() for t in self.trials]))

    def mean_evaluations_per_step(self) -> float:
        return float(np.mean([r.evaluations for t in self.trials
                              for r in t.records]))


# ---------------------------------------------------------------------------
# shipped scenarios


def scenario1_config(*, duration: int = 50, mc_trials: int = 50, base_seed: int = 0,
                     strategy: Strategy = Strategy.GREEDY, num_sensors: int = 2,
                     update_order: str = "ranked", particles_per_track: int = 3000,
                     max_components: int = 1000, k_best_assignments: int = 100
                     ) -> ScenarioConfig:
    """Three nearly-constant-turn targets, three birth sites, ten receivers."""
    motion = CtModel(dt=10.0, sigma_w=0.01, sigma_turn=1e-4)
    cov = np.diag(np.array([100.0, 10.0, 100.0, 10.0, math.pi / 180.0]) ** 2)
    means = [
        np.array([9500.0, 0.0, -4000.0, 0.0, 0.0]),
        np.array([9000.0, 0.0, 1000.0, 0.0, 0.0]),
        np.array([9000.0, 0.0, -2500.0, 0.0, 0.0]),
    ]
    birth = BirthModel(tuple(BirthTerm(0.02, m, cov) for m in means),
                       particles_per_track=particles_per_track)
    truth = (
        TruthTarget(1, 1, [9500.0, 15.0, -4000.0, 10.0, 0.0],
                    turn_segments=((1, 0.0), (12, 0.02), (28, 0.0))),
        TruthTarget(2, 10, [9000.0, -12.0, 1000.0, -10.0, 0.0],
                    turn_segments=((10, 0.0), (20, -0.02), (35, 0.0))),
        TruthTarget(3, 20, [9000.0, 18.0, -2500.0, 5.0, 0.0],
                    turn_segments=((20, 0.0), (30, 0.02))),
    )
    return ScenarioConfig(
        scenario="scenario1", duration=duration, motion=motion, birth=birth,
        survival=SurvivalModel(0.99),
        network=default_network(position_indices=motion.position_indices),
        filter_params=FilterParams(max_components, k_best_assignments, 0.5),
        strategy=strategy, num_sensors=num_sensors, update_order=update_order,
        ospa_params=OspaParams(1.0, 200.0), mc_trials=mc_trials,
        base_seed=base_seed, truth=truth)


def scenario2_config(*, duration: int = 50, mc_trials: int = 50, base_seed: int = 0,
                     strategy: Strategy = Strategy.GREEDY, num_sensors: int = 2,
                     update_order: str = "ranked", particles_per_track: int = 3000,
                     max_components: int = 1000, k_best_assignments: int = 100
                     ) -> ScenarioConfig:
    """Six constant-velocity targets from three birth sites, ten receivers."""
    motion = CvModel(dt=10.0, sigma_u=0.01)
    cov = np.diag(np.array([100.0, 100.0, 10.0, 10.0]) ** 2)
    means = [
        np.array([15000.0, -1500.0, 0.0, 0.0]),
        np.array([12000.0, 5000.0, 0.0, 0.0]),
        np.array([15000.0, -2500.0, 0.0, 0.0]),
    ]
    birth = BirthModel(tuple(BirthTerm(0.02, m, cov) for m in means),
                       particles_per_track=particles_per_track)
    truth = (
        TruthTarget(1, 1, [15000.0, -1500.0, -15.0, 5.0]),
        TruthTarget(2, 10, [12000.0, 5000.0, 10.0, -12.0]),
        TruthTarget(3, 20, [15000.0, -2500.0, -10.0, -8.0]),
        TruthTarget(4, 15, [15000.0, -1500.0, 12.0, 10.0]),
        TruthTarget(5, 15, [12000.0, 5000.0, -14.0, -6.0]),
        TruthTarget(6, 20, [15000.0, -2500.0, 15.0, 0.0]),
    )
    return ScenarioConfig(
        scenario="scenario2", duration=duration, motion=motion, birth=birth,
        survival=SurvivalModel(0.99),
        network=default_network(position_indices=motion.position_indices),
        filter_params=FilterParams(max_components, k_best_assignments, 0.5),
        strategy=strategy, num_sensors=num_sensors, update_order=update_order,
        ospa_params=OspaParams(1.0, 200.0), mc_trials=mc_trials,
        base_seed=base_seed, truth=truth)


# ---------------------------------------------------------------------------
# config (de)serialization


def config_to_dict(config: ScenarioConfig) -> dict:
    motion = config.motion
    if isinstance(motion, CtModel):
        motion_block = {"type": "ct", "dt": motion.dt, "sigma_w": motion.sigma_w,
                        "sigma_turn": motion.sigma_turn}
    else:
        motion_block = {"type": "cv", "dt": motion.dt, "sigma_u": motion.sigma_u}
    net = config.network
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.scenario,
        "duration": config.duration,
        "motion": motion_block,
        "birth": {
            "particles_per_track": config.birth.particles_per_track,
            "terms": [{"weight": t.weight, "mean": t.mean.tolist(),
                       "cov": t.cov.tolist()} for t in config.birth.terms],
        },
        "survival": config.survival.p_s,
        "network": {
            "transmitter": net.transmitter.position.tolist(),
            "receivers": [{"id": r.id, "position": r.position.tolist()}
                          for r in net.receivers],
            "detection": {"alpha": net.detection.alpha, "beta": net.detection.beta},
            "noise": {"rho0": net.noise.rho0, "eta_rho": net.noise.eta_rho,
                      "phi0": net.noise.phi0, "eta_phi": net.noise.eta_phi},
            "clutter": {"intensity": net.clutter.intensity,
                        "bearing": [net.clutter.bearing_min, net.clutter.bearing_max],
                        "range": [net.clutter.range_min, net.clutter.range_max]},
        },
        "filter": {
            "max_components": config.filter_params.max_components,
            "k_best_assignments": config.filter_params.k_best_assignments,
            "resample_threshold": config.filter_params.resample_threshold,
        },
        "selection": {"strategy": config.strategy.value,
                      "num_sensors": config.num_sensors,
                      "update_order": config.update_order},
        "ospa": {"order": config.ospa_params.order,
                 "cutoff": config.ospa_params.cutoff},
        "mc_trials": config.mc_trials,
        "base_seed": config.base_seed,
        "truth": [{
            "target_id": t.target_id,
            "birth_step": t.birth_step,
            "initial_state": t.initial_state.tolist(),
            "death_step": t.death_step,
            "turn_segments": [list(seg) for seg in t.turn_segments],
        } for t in config.truth],
    }


def config_from_dict(raw: dict) -> ScenarioConfig:
    try:
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}")
        motion_block = raw["motion"]
        if motion_block["type"] == "ct":
            motion = CtModel(dt=float(motion_block["dt"]),
                             sigma_w=float(motion_block["sigma_w"]),
                             sigma_turn=float(motion_block.get("sigma_turn", 1e-4)))
        elif motion_block["type"] == "cv":
            motion = CvModel(dt=float(motion_block["dt"]),
                             sigma_u=float(motion_block["sigma_u"]))
        else:
            raise ConfigError(f"unknown motion type {motion_block['type']!r}")
        birth_block = raw["birth"]
        birth = BirthModel(
            tuple(BirthTerm(float(t["weight"]), np.asarray(t["mean"], float),
                            np.asarray(t["cov"], float))
                  for t in birth_block["terms"]),
            particles_per_track=int(birth_block["particles_per_track"]))
        net_block = raw["network"]
        clutter_block = net_block["clutter"]
        network = RadarNetwork(
            transmitter=Transmitter(np.asarray(net_block["transmitter"], float)),
            receivers=tuple(Receiver(int(r["id"]), np.asarray(r["position"], float))
                            for r in net_block["receivers"]),
            detection=DetectionModel(float(net_block["detection"]["alpha"]),
                                     float(net_block["detection"]["beta"])),
            noise=NoiseModel(float(net_block["noise"]["rho0"]),
                             float(net_block["noise"]["eta_rho"]),
                             float(net_block["noise"]["phi0"]),
                             float(net_block["noise"]["eta_phi"])),
            clutter=ClutterModel(float(clutter_block["intensity"]),
                                 float(clutter_block["bearing"][0]),
                                 float(clutter_block["bearing"][1]),
                                 float(clutter_block["range"][0]),
                                 float(clutter_block["range"][1])),
            position_indices=motion.position_indices)
        filter_block = raw["filter"]
        selection_block = raw["selection"]
        config = ScenarioConfig(
            scenario=str(raw["scenario"]),
            duration=int(raw["duration"]),
            motion=motion, birth=birth,
            survival=SurvivalModel(float(raw["survival"])),
            network=network,
            filter_params=FilterParams(int(filter_block["max_components"]),
                                       int(filter_block["k_best_assignments"]),
                                       float(filter_block["resample_threshold"])),
            strategy=Strategy(selection_block["strategy"]),
            num_sensors=int(selection_block["num_sensors"]),
            update_order=str(selection_block.get("update_order", "ranked")),
            ospa_params=OspaParams(float(raw["ospa"]["order"]),
                                   float(raw["ospa"]["cutoff"])),
            mc_trials=int(raw["mc_trials"]),
            base_seed=int(raw["base_seed"]),
            truth=tuple(TruthTarget(
                int(t["target_id"]), int(t["birth_step"]),
                np.asarray(t["initial_state"], float),
                None if t.get("death_step") is None else int(t["death_step"]),
                tuple((int(s), float(w)) for s, w in t.get("turn_segments", [])),
            ) for t in raw["truth"]),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return config


def save_config(config: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")


def load_config(path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    return config_from_dict(raw)


def validate_config(path) -> ScenarioConfig:
    """Load and fully validate a config file; raises ConfigError on any defect."""
    return load_config(path)


# ---------------------------------------------------------------------------
# ground truth


def generate_truth(config: ScenarioConfig, rng: np.random.Generator
                   ) -> list[list[tuple[int, np.ndarray]]]:
    """Per-step list of (target id, state) for steps 1..duration.

    Returned index 0 corresponds to step 1.  Deterministic for a given rng
    state; process noise follows the scenario's motion model.
    """
    motion = config.motion
    is_turn = isinstance(motion, CtModel)
    per_step: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(config.duration)]
    for target in sorted(config.truth, key=lambda t: t.target_id):
        state = target.initial_state.copy()
        if is_turn:
            state[4] = target.turn_rate_at(target.birth_step)
        for step in range(target.birth_step, config.duration + 1):
            if not target.alive_at(step, config.duration):
                break
            if step > target.birth_step:
                if is_turn:
                    noise = rng.normal(scale=motion.sigma_w, size=2) \
                        if motion.sigma_w > 0 else np.zeros(2)
                    state = motion.transition(state, noise)
                    state[4] = target.turn_rate_at(step)
                else:
                    if motion.sigma_u > 0:
                        chol = np.linalg.cholesky(motion.process_noise_cov())
                        noise = chol @ rng.standard_normal(4)
                    else:
                        noise = np.zeros(4)
                    state = motion.transition(state, noise)
            per_step[step - 1].append((target.target_id, state.copy()))
    return per_step


# ---------------------------------------------------------------------------
# trial and experiment


def _select(config: ScenarioConfig, predicted, rng) -> SelectionResult:
    receivers = config.network.receivers
    if config.strategy is Strategy.GREEDY:
        return select_greedy(predicted, receivers, config.num_sensors,
                             config.network, config.filter_params)
    if config.strategy is Strategy.EXHAUSTIVE:
        return select_exhaustive(predicted, receivers, config.num_sensors,
                                 config.network, config.filter_params)
    return select_random(predicted, receivers, config.num_sensors,
                         config.network, config.filter_params, rng)


def run_trial(config: ScenarioConfig, trial_index: int) -> TrialResult:
    """One Monte-Carlo trial: predict, select, measure, fuse, extract, score."""
    started = _time.perf_counter()
    root = np.random.default_rng(config.base_seed + trial_index)
    truth_rng, sim_rng = root.spawn(2)
    truth = generate_truth(config, truth_rng)
    pos_idx = list(config.motion.position_indices)
    posterior = empty_density()
    records: list[StepRecord] = []
    error = None
    for step in range(1, config.duration + 1):
        try:
            pred_diag: dict = {}
            predicted = predict(posterior, config.birth, config.survival,
                                config.motion, config.filter_params, sim_rng,
                                time=step, diag=pred_diag)
            selection = _select(config, predicted, sim_rng)
            truth_positions = [state[pos_idx] for _, state in truth[step - 1]]
            sets = {
                rid: tuple(generate_measurement_set(
                    truth_positions, config.network.receiver_by_id(rid),
                    config.network.transmitter, config.network.detection,
                    config.network.noise, config.network.clutter, sim_rng))
                for rid in selection.ordered_sensors
            }
            message = MeasurementMessage(step, frozenset(selection.ordered_sensors),
                                         sets)
            fuse_diag: dict = {}
            if config.update_order == "ranked":
                posterior = dual_stage_fuse(predicted, selection, message,
                                            config.network, config.filter_params,
                                            diag=fuse_diag)
            else:
                order = list(selection.ordered_sensors)
                if config.update_order == "random":
                    sim_rng.shuffle(order)
                posterior = iterated_corrector_fuse(predicted, order, message,
                                                    config.network,
                                                    config.filter_params,
                                                    diag=fuse_diag)
            estimates = tuple(extract_estimates(posterior))
            est_positions = [est.state[pos_idx] for est in estimates]
            step_ospa = ospa(est_positions, truth_positions, config.ospa_params)
            records.append(StepRecord(
                step=step, estimates=estimates, ospa=step_ospa,
                selected=selection.ordered_sensors,
                rewards=tuple(selection.rewards[rid]
                              for rid in selection.ordered_sensors),
                evaluations=selection.evaluations,
                truncation_mass=max(pred_diag.get("discarded_mass", 0.0),
                                    fuse_diag.get("discarded_mass", 0.0))))
        except DegenerateDensityError as exc:
            error = f"step {step}: {exc}"
            break
    return TrialResult(trial_index=trial_index, records=tuple(records),
                       error=error, wall_time=_time.perf_counter() - started,
                       total_evaluations=sum(r.evaluations for r in records))


def run_experiment(config: ScenarioConfig, out_dir=None, parallel: int = 1,
                   dump_estimates: bool = False) -> ExperimentReport:
    """All Monte-Carlo trials plus optional CSV outputs.

    ``parallel`` > 1 fans trials out to worker processes; per-trial seeding
    makes the outputs identical either way.
    """
    indices = range(config.mc_trials)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            trials = tuple(pool.map(partial(run_trial, config), indices))
    else:
        trials = tuple(run_trial(config, i) for i in indices)
    report = ExperimentReport(config=config, trials=trials)
    if out_dir is not None:
        write_outputs(report, out_dir, dump_estimates=dump_estimates)
    return report


# ---------------------------------------------------------------------------
# persistence


def _fmt(value: float) -> str:
    return repr(float(value))


def steps_csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "step", "ospa", "ospa_loc", "ospa_card",
                     "selected", "rewards", "evaluations", "truncation_mass"])
    for trial in report.trials:
        for rec in trial.records:
            writer.writerow([
                trial.trial_index, rec.step, _fmt(rec.ospa.total),
                _fmt(rec.ospa.localization), _fmt(rec.ospa.cardinality),
                "|".join(str(s) for s in rec.selected),
                "|".join(_fmt(r) for r in rec.rewards),
                rec.evaluations, _fmt(rec.truncation_mass)])
    return buf.getvalue()


def summary_csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "mean_ospa", "mean_ospa_loc", "mean_ospa_card",
                     "mean_evaluations", "mean_truncation_mass"])
    complete = [t for t in report.trials if t.error is None]
    for step in range(1, report.config.duration + 1):
        recs = [t.records[step - 1] for t in complete
                if len(t.records) >= step]
        if not recs:
            continue
        writer.writerow([
            step,
            _fmt(np.mean([r.ospa.total for r in recs])),
            _fmt(np.mean([r.ospa.localization for r in recs])),
            _fmt(np.mean([r.ospa.cardinality for r in recs])),
            _fmt(np.mean([r.evaluations for r in recs])),
            _fmt(np.mean([r.truncation_mass for r in recs]))])
    return buf.getvalue()


def estimates_csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "step", "label_time", "label_index", "state"])
    for trial in report.trials:
        for rec in trial.records:
            for est in rec.estimates:
                writer.writerow([
                    trial.trial_index, rec.step, est.label.birth_time,
                    est.label.birth_index,
                    "|".join(_fmt(v) for v in est.state)])
    return buf.getvalue()


def write_outputs(report: ExperimentReport, out_dir,
                  dump_estimates: bool = False) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "steps.csv").write_text(steps_csv_text(report))
    (out / "summary.csv").write_text(summary_csv_text(report))
    if dump_estimates:
        (out / "estimates.csv").write_text(estimates_csv_text(report))
    errors = [t for t in report.trials if t.error is not None]
    if errors:
        lines = [f"trial {t.trial_index}: {t.error}" for t in errors]
        (out / "errors.txt").write_text("\n".join(lines) + "\n")
