"""Target motion, survival, and birth models.

Two single-target dynamics are supported: a nearly-constant-turn model on
the state [x, xdot, y, ydot, omega] and a constant-velocity model on
[x, y, xdot, ydot].  Both expose a scalar ``transition`` (deterministic or
with caller-supplied noise) and a vectorized ``propagate`` that samples
process noise for a whole particle array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rfs import Label, ParticleDensity

# below this turn rate the analytic omega -> 0 limit of the turn matrix is used
OMEGA_EPS = 1e-6


def _turn_factors(omega: np.ndarray, dt: float):
    """sin(w*dt)/w and (1-cos(w*dt))/w with their w -> 0 limits."""
    omega = np.asarray(omega, dtype=float)
    small = np.abs(omega) < OMEGA_EPS
    safe = np.where(small, 1.0, omega)
    s = np.where(small, dt, np.sin(safe * dt) / safe)
    c = np.where(small, 0.0, (1.0 - np.cos(safe * dt)) / safe)
    return s, c


@dataclass(frozen=True)
class CtModel:
    """Nearly-constant-turn dynamics on [x, xdot, y, ydot, omega].

    sigma_w is the acceleration noise injected through the double-integrator
    gain; sigma_turn is the turn-rate random-walk noise (rad/s^2), applied as
    omega_k = omega_{k-1} + dt * n_omega.
    """

    dt: float = 10.0
    sigma_w: float = 0.01
    sigma_turn: float = 1e-4

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.sigma_w < 0.0 or self.sigma_turn < 0.0:
            raise ValueError("noise scales must be nonnegative")

    state_dim = 5
    position_indices = (0, 2)
    velocity_indices = (1, 3)

    def transition(self, state: np.ndarray, noise=None) -> np.ndarray:
        """One deterministic step, optionally with a 2-vector acceleration noise."""
        out = self.propagate_deterministic(np.asarray(state, float)[None, :])[0]
        if noise is not None:
            n = np.asarray(noise, dtype=float).ravel()
            out = out + self._gain_matrix() @ n
        return out

    def propagate_deterministic(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        x, vx, y, vy, omega = states.T
        s, c = _turn_factors(omega, self.dt)
        cos_wt = np.cos(omega * self.dt)
        sin_wt = np.sin(omega * self.dt)
        out = np.empty_like(states)
        out[:, 0] = x + s * vx - c * vy
        out[:, 1] = cos_wt * vx - sin_wt * vy
        out[:, 2] = c * vx + y + s * vy
        out[:, 3] = sin_wt * vx + cos_wt * vy
        out[:, 4] = omega
        return out

    def _gain_matrix(self) -> np.ndarray:
        h = 0.5 * self.dt**2
        return np.array([[h, 0.0], [self.dt, 0.0], [0.0, h], [0.0, self.dt]])

    def propagate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sampled transition for an (n, 5) particle array."""
        out = self.propagate_deterministic(states)
        n = states.shape[0]
        accel = rng.normal(scale=self.sigma_w, size=(n, 2)) if self.sigma_w > 0 \
            else np.zeros((n, 2))
        out[:, :4] += accel @ self._gain_matrix().T
        if self.sigma_turn > 0:
            out[:, 4] += self.dt * rng.normal(scale=self.sigma_turn, size=n)
        return out

    def turn_matrix(self, omega: float) -> np.ndarray:
        """The 4x4 position/velocity transition matrix F(omega)."""
        s, c = _turn_factors(np.array(omega), self.dt)
        cos_wt = float(np.cos(omega * self.dt))
        sin_wt = float(np.sin(omega * self.dt))
        return np.array([
            [1.0, float(s), 0.0, -float(c)],
            [0.0, cos_wt, 0.0, -sin_wt],
            [0.0, float(c), 1.0, float(s)],
            [0.0, sin_wt, 0.0, cos_wt],
        ])


@dataclass(frozen=True)
class CvModel:
    """Constant-velocity dynamics on [x, y, xdot, ydot] with white-noise acceleration."""

    dt: float = 10.0
    sigma_u: float = 0.01

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.sigma_u < 0.0:
            raise ValueError("sigma_u must be nonnegative")

    state_dim = 4
    position_indices = (0, 1)
    velocity_indices = (2, 3)

    def transition_matrix(self) -> np.ndarray:
        f = np.eye(4)
        f[0, 2] = self.dt
        f[1, 3] = self.dt
        return f

    def process_noise_cov(self) -> np.ndarray:
        t = self.dt
        q = np.array([
            [t**3 / 3.0, 0.0, t**2 / 2.0, 0.0],
            [0.0, t**3 / 3.0, 0.0, t**2 / 2.0],
            [t**2 / 2.0, 0.0, t, 0.0],
            [0.0, t**2 / 2.0, 0.0, t],
        ])
        return self.sigma_u**2 * q

    def transition(self, state: np.ndarray, noise=None) -> np.ndarray:
        out = self.transition_matrix() @ np.asarray(state, dtype=float).ravel()
        if noise is not None:
            out = out + np.asarray(noise, dtype=float).ravel()
        return out

    def propagate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        out = states @ self.transition_matrix().T
        if self.sigma_u > 0:
            chol = np.linalg.cholesky(self.process_noise_cov())
            out += rng.standard_normal(states.shape) @ chol.T
        return out


@dataclass(frozen=True)
class SurvivalModel:
    """Constant per-step survival probability."""

    p_s: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must lie in [0, 1]")


@dataclass(frozen=True)
class BirthTerm:
    """One labeled-Bernoulli birth hypothesis: existence weight and Gaussian prior."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        if not 0.0 < self.weight < 1.0:
            raise ValueError("birth existence weight must lie in (0, 1)")
        if cov.shape != (mean.size, mean.size):
            raise ValueError("birth covariance shape mismatch")
        if not np.allclose(cov, cov.T):
            raise ValueError("birth covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("birth covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + rng.standard_normal((count, self.mean.size)) @ self._chol.T


@dataclass(frozen=True)
class BirthModel:
    """Labeled multi-Bernoulli birth process with a shared particle budget."""

    terms: tuple[BirthTerm, ...]
    particles_per_track: int = 3000

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.particles_per_track < 1:
            raise ValueError("particles_per_track must be positive")


def ct_transition(state, model: CtModel, noise=None) -> np.ndarray:
    """Single constant-turn step; ``noise`` is a 2-vector acceleration or None."""
    return model.transition(state, noise)


def cv_transition(state, model: CvModel, noise=None) -> np.ndarray:
    """Single constant-velocity step; ``noise`` is a 4-vector or None."""
    return model.transition(state, noise)


def sample_birth(model: BirthModel, time: int, rng: np.random.Generator
                 ) -> list[tuple[Label, ParticleDensity, float]]:
    """Draw one labeled particle cloud per birth term.

    Labels are (time, i) with i numbering the birth terms from 1; each cloud
    holds ``particles_per_track`` equally weighted draws from the term's
    Gaussian prior.
    """
    count = model.particles_per_track
    weights = np.full(count, 1.0 / count)
    out = []
    for index, term in enumerate(model.terms, start=1):
        particles = term.sample(count, rng)
        out.append((Label(time, index), ParticleDensity(particles, weights.copy()),
                    term.weight))
    return out
