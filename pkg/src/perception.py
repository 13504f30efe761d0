from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .config import (
    DOWNSAMPLE_WINDOW,
    GOAL_DISTANCE_LIMIT,
    LIDAR_BEAMS,
    LIDAR_FOV,
    LIDAR_MAX_RANGE,
    OMEGA_MAX,
    SCAN_CHANNELS,
    V_MAX,
)
from .errors import ShapeError
from .models import RobotState, Scenario, StateVector, Vec2
from .world import lidar_scan, wrap_angle


@dataclass(frozen=True)
class SensorConfig:
    fov: float = LIDAR_FOV
    n_beams: int = LIDAR_BEAMS
    max_range: float = LIDAR_MAX_RANGE
    window: int = DOWNSAMPLE_WINDOW
    channels: int = SCAN_CHANNELS


@dataclass(frozen=True)
class SensorLimits:
    """Upper limits T(.) of the distance-dependent channels plus angular scales."""

    scan_max: float = LIDAR_MAX_RANGE
    d_max: float = GOAL_DISTANCE_LIMIT
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX

    def __post_init__(self) -> None:
        if min(self.scan_max, self.d_max, self.v_max, self.omega_max) <= 0:
            raise ValueError("sensor limits must be positive")


def min_downsample(scan: np.ndarray, k: int = DOWNSAMPLE_WINDOW, n_out: int = SCAN_CHANNELS) -> np.ndarray:
    # Full non-overlapping windows of k beams, zero-based: out[i] = min(scan[i*k : i*k + k]).
    values = np.asarray(scan, dtype=float)
    if values.ndim != 1 or values.size != n_out * k:
        raise ShapeError(f"scan of length {values.size} cannot be split into {n_out} windows of {k}")
    return values.reshape(n_out, k).min(axis=1)


def relative_goal(pose: tuple[Vec2, float], goal: Vec2) -> tuple[float, float]:
    position, heading = pose
    dx, dy = goal.x - position.x, goal.y - position.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return 0.0, 0.0
    return d, wrap_angle(math.atan2(dy, dx) - heading)


def observe(s: Scenario, state: RobotState, goal: Vec2, sensor: SensorConfig = SensorConfig()) -> StateVector:
    pose = (state.position, state.heading)
    raw = lidar_scan(s, pose, sensor.fov, sensor.n_beams, sensor.max_range)
    d_goal, phi_goal = relative_goal(pose, goal)
    return StateVector(
        scans=min_downsample(raw, sensor.window, sensor.channels),
        d_goal=d_goal,
        phi_goal=phi_goal,
        v=state.v,
        omega=state.omega,
    )


def normalize(sv: StateVector, limits: SensorLimits = SensorLimits()) -> np.ndarray:
    """Layout: scans..., d_goal, phi_goal, v, omega; each channel clipped to [-1, 1]."""
    if not sv.within(limits.scan_max, limits.v_max, limits.omega_max):
        raise ValueError("state vector exceeds the sensor limits")
    out = np.concatenate(
        [
            np.asarray(sv.scans, dtype=float) / limits.scan_max,
            [
                sv.d_goal / limits.d_max,
                sv.phi_goal / math.pi,
                sv.v / limits.v_max,
                sv.omega / limits.omega_max,
            ],
        ]
    )
    return np.clip(out, -1.0, 1.0)


def denormalize(vec: np.ndarray, limits: SensorLimits = SensorLimits()) -> StateVector:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (SCAN_CHANNELS + 4,):
        raise ShapeError(f"cannot read a state vector from shape {vec.shape}")
    return StateVector(
        scans=vec[:-4] * limits.scan_max,
        d_goal=float(vec[-4] * limits.d_max),
        phi_goal=wrap_angle(float(vec[-3] * math.pi)),
        v=float(vec[-2] * limits.v_max),
        omega=float(vec[-1] * limits.omega_max),
    )
