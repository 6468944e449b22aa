"""Observation, motion and birth models for the daughter filters.

States are (x, y, vx, vy); measurements are planar positions.  The sensor
state enters the observation model only through an additive measurement
offset (the drift map), so conditioning on a sensor hypothesis reduces to
shifting the measurement set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cardinality import CardinalityModel
from .gm import GaussianMixture


def ncv_transition(dt: float = 1.0) -> np.ndarray:
    """Nearly-constant-velocity transition for (x, y, vx, vy)."""
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def ncv_process_noise(accel_noise: float, dt: float = 1.0) -> np.ndarray:
    """White-noise-acceleration process covariance (G sigma^2 G' form)."""
    G = np.array(
        [
            [0.5 * dt * dt, 0.0],
            [0.0, 0.5 * dt * dt],
            [dt, 0.0],
            [0.0, dt],
        ]
    )
    return accel_noise**2 * (G @ G.T)


def position_offset(sensor_state) -> np.ndarray:
    """Default drift rule: the sensor's position offsets every measurement."""
    return np.asarray(sensor_state, dtype=float)[:2]


@dataclass
class ObservationModel:
    """Position-extracting linear observation with uniform detection."""

    H: np.ndarray
    R: np.ndarray
    p_d: float
    drift_map: Callable[[np.ndarray], np.ndarray] = position_offset

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        np.linalg.cholesky(self.R)  # must be SPD

    @classmethod
    def planar(cls, meas_noise: float, p_d: float, drift_map=position_offset) -> "ObservationModel":
        H = np.zeros((2, 4))
        H[0, 0] = 1.0
        H[1, 1] = 1.0
        return cls(H, meas_noise**2 * np.eye(2), p_d, drift_map)

    def shift_measurements(self, Z: np.ndarray, sensor_state) -> np.ndarray:
        """Condition on a sensor hypothesis by removing its drift offset."""
        Z = np.asarray(Z, dtype=float).reshape(-1, self.H.shape[0])
        return Z - self.drift_map(sensor_state)[None, :]


@dataclass
class MotionModel:
    """Linear-Gaussian target motion with uniform survival."""

    F: np.ndarray
    Q: np.ndarray
    p_s: float

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("survival probability must lie in [0, 1]")

    @classmethod
    def ncv(cls, accel_noise: float, p_s: float, dt: float = 1.0) -> "MotionModel":
        return cls(ncv_transition(dt), ncv_process_noise(accel_noise, dt), p_s)


@dataclass
class BirthModel:
    """Birth intensity plus the cardinality law of the birth process.

    The intensity's mass must equal the cardinality mean (the intensity of
    a point process integrates to its expected count).
    """

    intensity: GaussianMixture
    cardinality: CardinalityModel

    def __post_init__(self):
        if abs(self.intensity.mass() - self.cardinality.mean()) > 1e-9 * max(
            1.0, self.cardinality.mean()
        ):
            raise ValueError("birth intensity mass must equal the birth cardinality mean")

    @property
    def mean(self) -> float:
        return self.cardinality.mean()

    @property
    def variance(self) -> float:
        return self.cardinality.variance()
