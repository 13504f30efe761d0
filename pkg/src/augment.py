from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import AUGMENT_PROBABILITY, AUGMENT_UPPER_BOUND
from .models import StateVector
from .perception import SensorLimits


@dataclass(frozen=True)
class AugmentConfig:
    probability: float = AUGMENT_PROBABILITY
    upper_bound: float = AUGMENT_UPPER_BOUND
    limits: SensorLimits = field(default_factory=SensorLimits)

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("augmentation probability must lie in [0, 1]")
        if not self.upper_bound > 1.0:
            raise ValueError("scale factor upper bound must exceed 1")


def sample_rho(rng: np.random.Generator, cfg: AugmentConfig) -> float:
    """One draw per episode: 1.0 when eps >= P, otherwise U[1, M]."""
    eps = float(rng.uniform(0.0, 1.0))
    if eps >= cfg.probability:
        return 1.0
    return float(rng.uniform(1.0, cfg.upper_bound))


def scale_observation(sv: StateVector, rho: float, cfg: AugmentConfig) -> StateVector:
    if rho == 1.0:
        return sv
    lim = cfg.limits
    return replace(
        sv,
        scans=np.minimum(rho * np.asarray(sv.scans, dtype=float), lim.scan_max),
        d_goal=min(rho * sv.d_goal, lim.d_max),
        v=min(rho * sv.v, lim.v_max),
    )


def scale_action(action: tuple[float, float], rho: float) -> tuple[float, float]:
    v, omega = action
    return v / rho, omega


def scaled_radius(r: float, rho: float) -> float:
    if r <= 0:
        raise ValueError("radius must be positive")
    return r / rho
