"""Bistatic passive radar measurement model.

One transmitter of opportunity, many receivers.  A detected target yields a
bearing (receiver-relative) and a bistatic range (transmitter-target-receiver
distance sum).  Detection probability and both noise scales degrade with the
target-receiver distance; clutter is Poisson and uniform over the sensor's
bearing/range window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

LOG_2PI = math.log(2.0 * math.pi)


class UndefinedBearingError(ValueError):
    """Target sits exactly on the receiver: bearing is undefined."""


def wrap_angle(angle):
    """Wrap angles into [-pi, pi]."""
    return (np.asarray(angle) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class Receiver:
    id: int
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).ravel()
        if pos.shape != (2,) or not np.all(np.isfinite(pos)):
            raise ValueError("receiver position must be a finite 2-vector")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class Transmitter:
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).ravel()
        if pos.shape != (2,) or not np.all(np.isfinite(pos)):
            raise ValueError("transmitter position must be a finite 2-vector")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class DetectionModel:
    """Range-degraded detection: p_D(d) = 1 - Phi((d - alpha) / sqrt(beta))."""

    alpha: float = 15000.0
    beta: float = 4000.0**2

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")

    def probability(self, distance):
        return 1.0 - ndtr((np.asarray(distance, float) - self.alpha)
                          / math.sqrt(self.beta))


@dataclass(frozen=True)
class NoiseModel:
    """Distance-dependent measurement noise scales.

    sigma_phi = phi0 + eta_phi * d,  sigma_rho = rho0 + eta_rho * d^2,
    with d the target-receiver distance.
    """

    rho0: float = 1.0
    eta_rho: float = 5e-5
    phi0: float = math.pi / 180.0
    eta_phi: float = 1e-5

    def __post_init__(self):
        if min(self.rho0, self.eta_rho, self.phi0, self.eta_phi) < 0.0:
            raise ValueError("noise parameters must be nonnegative")

    def sigma_bearing(self, distance):
        return self.phi0 + self.eta_phi * np.asarray(distance, float)

    def sigma_range(self, distance):
        return self.rho0 + self.eta_rho * np.asarray(distance, float) ** 2


@dataclass(frozen=True)
class ClutterModel:
    """Poisson clutter, uniform over bearing x bistatic-range window."""

    intensity: float = 2e-5
    bearing_min: float = -math.pi
    bearing_max: float = math.pi
    range_min: float = 0.0
    range_max: float = 15000.0

    def __post_init__(self):
        if self.intensity < 0.0:
            raise ValueError("clutter intensity must be nonnegative")
        if self.bearing_max <= self.bearing_min or self.range_max <= self.range_min:
            raise ValueError("degenerate clutter region")

    @property
    def region_volume(self) -> float:
        return (self.bearing_max - self.bearing_min) * (self.range_max - self.range_min)

    @property
    def mean_count(self) -> float:
        return self.intensity * self.region_volume

    def contains(self, measurement: "Measurement") -> bool:
        return (self.bearing_min <= measurement.bearing <= self.bearing_max
                and self.range_min <= measurement.bistatic_range <= self.range_max)


@dataclass(frozen=True)
class Measurement:
    """Bearing (rad, in [-pi, pi]) and bistatic range (m)."""

    bearing: float
    bistatic_range: float

    def __post_init__(self):
        if not -math.pi <= self.bearing <= math.pi:
            raise ValueError("bearing must lie in [-pi, pi]")
        if self.bistatic_range < 0.0:
            raise ValueError("bistatic range must be nonnegative")


@dataclass(frozen=True)
class MeasurementMessage:
    """Per-scan message: time step, activated receiver ids, per-receiver sets."""

    time: int
    activated: frozenset[int]
    sets: dict[int, tuple[Measurement, ...]]

    def __post_init__(self):
        object.__setattr__(self, "activated", frozenset(self.activated))
        object.__setattr__(self, "sets",
                           {k: tuple(v) for k, v in self.sets.items()})
        if set(self.sets) != set(self.activated):
            raise ValueError("measurement sets must cover exactly the activated sensors")


def detection_probability(target_pos, receiver: Receiver,
                          model: DetectionModel) -> float:
    """Probability that the receiver detects a target at the given position."""
    d = float(np.linalg.norm(np.asarray(target_pos, float) - receiver.position))
    return float(model.probability(d))


def ideal_measurement(target_pos, receiver: Receiver,
                      transmitter: Transmitter) -> Measurement:
    """Noise-free bearing and bistatic range of a target position."""
    p = np.asarray(target_pos, dtype=float).ravel()
    rel = p - receiver.position
    if np.hypot(rel[0], rel[1]) == 0.0:
        raise UndefinedBearingError("target coincides with the receiver")
    bearing = math.atan2(rel[1], rel[0])
    rho = float(np.linalg.norm(p - transmitter.position)
                + np.linalg.norm(rel))
    return Measurement(bearing, rho)


def noisy_measurement(target_pos, receiver: Receiver, transmitter: Transmitter,
                      noise: NoiseModel, rng: np.random.Generator) -> Measurement:
    """Ideal measurement plus independent Gaussian noise with distance-scaled sigmas."""
    ideal = ideal_measurement(target_pos, receiver, transmitter)
    d = float(np.linalg.norm(np.asarray(target_pos, float) - receiver.position))
    bearing = float(wrap_angle(ideal.bearing
                               + rng.normal(scale=float(noise.sigma_bearing(d)))))
    rho = max(0.0, ideal.bistatic_range
              + rng.normal(scale=float(noise.sigma_range(d))))
    return Measurement(bearing, rho)


def _log_likelihood_states(z: Measurement, states: np.ndarray, receiver: Receiver,
                           transmitter: Transmitter, noise: NoiseModel,
                           position_indices=(0, 1)) -> np.ndarray:
    """Vectorized log g(z | x) over an (n, state_dim) particle array."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    pos = states[:, list(position_indices)]
    rel = pos - receiver.position
    d = np.hypot(rel[:, 0], rel[:, 1])
    bearing = np.arctan2(rel[:, 1], rel[:, 0])
    rho = np.hypot(*(pos - transmitter.position).T) + d
    s_phi = noise.sigma_bearing(d)
    s_rho = noise.sigma_range(d)
    res_phi = wrap_angle(z.bearing - bearing)
    res_rho = z.bistatic_range - rho
    return (-0.5 * (res_phi / s_phi) ** 2 - 0.5 * (res_rho / s_rho) ** 2
            - np.log(s_phi) - np.log(s_rho) - LOG_2PI)


def likelihood(z: Measurement, x, receiver: Receiver, transmitter: Transmitter,
               noise: NoiseModel, position_indices=(0, 1)) -> float:
    """Measurement density g(z | x): product of the two univariate Gaussians.

    The bearing residual is wrapped into [-pi, pi] before evaluation.
    """
    logg = _log_likelihood_states(z, np.atleast_2d(x), receiver, transmitter,
                                  noise, position_indices)
    return float(np.exp(logg[0]))


def clutter_intensity(z: Measurement, model: ClutterModel) -> float:
    """Clutter density at z: uniform intensity inside the window, zero outside."""
    return model.intensity if model.contains(z) else 0.0


def generate_measurement_set(truth_positions, receiver: Receiver,
                             transmitter: Transmitter, detection: DetectionModel,
                             noise: NoiseModel, clutter: ClutterModel,
                             rng: np.random.Generator) -> list[Measurement]:
    """One scan: thinned noisy target returns plus uniform Poisson clutter, shuffled."""
    measurements = []
    for pos in truth_positions:
        if rng.uniform() < detection_probability(pos, receiver, detection):
            measurements.append(noisy_measurement(pos, receiver, transmitter,
                                                  noise, rng))
    n_clutter = rng.poisson(clutter.mean_count)
    for _ in range(n_clutter):
        measurements.append(Measurement(
            float(rng.uniform(clutter.bearing_min, clutter.bearing_max)),
            float(rng.uniform(clutter.range_min, clutter.range_max))))
    order = rng.permutation(len(measurements))
    return [measurements[i] for i in order]


@dataclass(frozen=True)
class BistaticSensor:
    """Filter-facing view of one receiver: detection, likelihood, clutter reference.

    ``kappa`` deliberately returns the nominal clutter intensity everywhere
    (not zero outside the window): real returns from distant targets can fall
    beyond the clutter window, and the update needs a finite false-alarm
    reference density to score them against.
    """

    receiver: Receiver
    transmitter: Transmitter
    detection: DetectionModel
    noise: NoiseModel
    clutter: ClutterModel
    position_indices: tuple[int, ...] = (0, 1)

    def detection_prob(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        pos = states[:, list(self.position_indices)]
        d = np.hypot(*(pos - self.receiver.position).T)
        return self.detection.probability(d)

    def log_g(self, z: Measurement, states: np.ndarray) -> np.ndarray:
        return _log_likelihood_states(z, states, self.receiver, self.transmitter,
                                      self.noise, self.position_indices)

    def kappa(self, z: Measurement) -> float:
        return self.clutter.intensity

    def ideal(self, target_pos) -> Measurement:
        return ideal_measurement(target_pos, self.receiver, self.transmitter)


@dataclass(frozen=True)
class RadarNetwork:
    """The whole sensing side: transmitter, receivers, and shared sensor models."""

    transmitter: Transmitter
    receivers: tuple[Receiver, ...]
    detection: DetectionModel = field(default_factory=DetectionModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    clutter: ClutterModel = field(default_factory=ClutterModel)
    position_indices: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        receivers = tuple(self.receivers)
        ids = [r.id for r in receivers]
        if len(set(ids)) != len(ids):
            raise ValueError("receiver ids must be unique")
        object.__setattr__(self, "receivers", receivers)

    def receiver_by_id(self, receiver_id: int) -> Receiver:
        for r in self.receivers:
            if r.id == receiver_id:
                return r
        raise KeyError(f"no receiver with id {receiver_id}")

    def sensor_for(self, receiver: Receiver | int) -> BistaticSensor:
        if isinstance(receiver, int):
            receiver = self.receiver_by_id(receiver)
        return BistaticSensor(receiver, self.transmitter, self.detection,
                              self.noise, self.clutter, self.position_indices)


def default_network(position_indices=(0, 1)) -> RadarNetwork:
    """Ten receivers on two rows straddling the surveillance area, transmitter at origin."""
    xs = [0.0, 7500.0, 15000.0, 22500.0, 30000.0]
    receivers = []
    next_id = 1
    for y in (-5000.0, 5000.0):
        for x in xs:
            receivers.append(Receiver(next_id, np.array([x, y])))
            next_id += 1
    return RadarNetwork(Transmitter(np.zeros(2)), tuple(receivers),
                        position_indices=position_indices)
