"""Extended Kalman filter with a planar constant-velocity motion model.

State is ``[x, y, theta, v]`` in the world frame; observations are proposal
centroids ``[x, y]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle

H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    q: tuple = (0.01, 0.01, 0.05, 0.1)
    r: tuple = (0.04, 0.04)
    p0: tuple = (0.25, 0.25, (math.pi / 2) ** 2, 4.0)
    dt: float = 0.1

    def __post_init__(self):
        if min(self.q + self.r + self.p0) < 0:
            raise ValueError("noise variances must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q)

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r)

    @property
    def P0(self) -> np.ndarray:
        return np.diag(self.p0)


@dataclass(frozen=True, eq=False)
class TrackState:
    mean: np.ndarray  # x, y, theta, v
    cov: np.ndarray
    innovation: np.ndarray | None = field(default=None, compare=False)

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def velocity(self) -> np.ndarray:
        """Planar velocity vector; unambiguous unlike the (theta, v) pair."""
        return self.mean[3] * np.array([math.cos(self.mean[2]), math.sin(self.mean[2])])


def motion_model(mean: np.ndarray, dt: float) -> np.ndarray:
    x, y, th, v = mean
    return np.array([x + dt * math.cos(th) * v, y + dt * math.sin(th) * v, th, v])


def motion_jacobian(mean: np.ndarray, dt: float) -> np.ndarray:
    _, _, th, v = mean
    c, s = math.cos(th), math.sin(th)
    return np.array(
        [
            [1.0, 0.0, -dt * s * v, dt * c],
            [0.0, 1.0, dt * c * v, dt * s],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def initialize(centroid, noise: NoiseConfig = NoiseConfig()) -> TrackState:
    """New track at the proposal centroid with zero heading and speed."""
    c = np.asarray(centroid, dtype=float)
    if not np.all(np.isfinite(c[:2])):
        raise NumericError("non-finite centroid")
    return TrackState(np.array([c[0], c[1], 0.0, 0.0]), noise.P0.copy())


def predict(state: TrackState, dt: float | None = None, noise: NoiseConfig = NoiseConfig()) -> TrackState:
    dt = noise.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    J = motion_jacobian(state.mean, dt)
    mean = motion_model(state.mean, dt)
    mean[2] = wrap_angle(mean[2])
    cov = J @ state.cov @ J.T + noise.Q
    return TrackState(mean, 0.5 * (cov + cov.T))


def update(state: TrackState, obs, noise: NoiseConfig = NoiseConfig()) -> TrackState:
    """Position update with the Joseph-form covariance."""
    z = np.asarray(obs, dtype=float)[:2]
    innovation = z - H @ state.mean
    if not np.all(np.isfinite(innovation)):
        raise NumericError(f"non-finite innovation {innovation}")
    P = state.cov
    S = H @ P @ H.T + noise.R
    K = np.linalg.solve(S, H @ P).T
    mean = state.mean + K @ innovation
    mean[2] = wrap_angle(mean[2])
    A = np.eye(4) - K @ H
    cov = A @ P @ A.T + K @ noise.R @ K.T
    return TrackState(mean, 0.5 * (cov + cov.T), innovation)
