from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .config import SCAN_CHANNELS
from .errors import ScenarioValidationError


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x}, {self.y})")

    def scaled(self, factor: float) -> Vec2:
        return Vec2(self.x * factor, self.y * factor)

    def distance_to(self, other: Vec2) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class Segment:
    a: Vec2
    b: Vec2

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ScenarioValidationError(f"degenerate segment at ({self.a.x}, {self.a.y})")


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains(self, p: Vec2, strict: bool = False) -> bool:
        if strict:
            return self.xmin < p.x < self.xmax and self.ymin < p.y < self.ymax
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax

    def covers(self, other: Rect) -> bool:
        return (
            self.xmin <= other.xmin
            and self.ymin <= other.ymin
            and other.xmax <= self.xmax
            and other.ymax <= self.ymax
        )

    def intersection(self, other: Rect) -> Rect | None:
        xmin, ymin = max(self.xmin, other.xmin), max(self.ymin, other.ymin)
        xmax, ymax = min(self.xmax, other.xmax), min(self.ymax, other.ymax)
        if xmin >= xmax or ymin >= ymax:
            return None
        return Rect(xmin, ymin, xmax, ymax)

    def scaled(self, factor: float) -> Rect:
        return Rect(self.xmin * factor, self.ymin * factor, self.xmax * factor, self.ymax * factor)

    @classmethod
    def centered(cls, center: Vec2, size: float) -> Rect:
        half = size / 2.0
        return cls(center.x - half, center.y - half, center.x + half, center.y + half)


@dataclass(frozen=True)
class Scenario:
    """Immutable 2D world. `obstacles` starts with the four boundary segments."""

    name: str
    bounds: Rect
    obstacles: tuple[Segment, ...]
    spawn_window: Rect
    segment_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.bounds.width <= 0 or self.bounds.height <= 0:
            raise ScenarioValidationError(f"{self.name}: bounds must have positive area")
        if not self.bounds.covers(self.spawn_window):
            raise ScenarioValidationError(f"{self.name}: spawn_window is not inside bounds")
        if self.spawn_window.width <= 0 or self.spawn_window.height <= 0:
            raise ScenarioValidationError(f"{self.name}: spawn_window must have positive area")
        for i, seg in enumerate(self.obstacles):
            if not (self.bounds.contains(seg.a) and self.bounds.contains(seg.b)):
                raise ScenarioValidationError(f"{self.name}: segment {i} leaves the bounds")
        arr = np.array(
            [[s.a.x, s.a.y, s.b.x, s.b.y] for s in self.obstacles], dtype=float
        ).reshape(-1, 4)
        arr.setflags(write=False)
        object.__setattr__(self, "segment_array", arr)


class TerminalSignal(str, Enum):
    NONE = "none"
    GOAL = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"

    @property
    def is_terminal(self) -> bool:
        return self is not TerminalSignal.NONE

    @property
    def done_flag(self) -> bool:
        # Timeouts keep bootstrapping.
        return self in (TerminalSignal.GOAL, TerminalSignal.COLLISION)

    @property
    def outcome(self) -> str:
        return {
            TerminalSignal.GOAL: "success",
            TerminalSignal.COLLISION: "collision",
        }.get(self, "timeout")


@dataclass(frozen=True)
class RobotState:
    position: Vec2
    heading: float
    v: float
    omega: float
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("robot radius must be positive")
        if not -math.pi < self.heading <= math.pi:
            raise ValueError(f"heading {self.heading} outside (-pi, pi]")
        if not (math.isfinite(self.v) and math.isfinite(self.omega)) or self.v < 0:
            raise ValueError(f"bad velocity ({self.v}, {self.omega})")


@dataclass(frozen=True, eq=False)
class StateVector:
    scans: np.ndarray
    d_goal: float
    phi_goal: float
    v: float
    omega: float

    def __post_init__(self) -> None:
        scans = np.asarray(self.scans, dtype=float)
        if scans.shape != (SCAN_CHANNELS,):
            raise ValueError(f"expected {SCAN_CHANNELS} scan channels, got shape {scans.shape}")
        if not np.all(np.isfinite(scans)) or np.any(scans <= 0.0):
            raise ValueError("scan distances must be finite and positive")
        if self.d_goal < 0:
            raise ValueError("goal distance must be non-negative")
        if not -math.pi < self.phi_goal <= math.pi:
            raise ValueError(f"goal bearing {self.phi_goal} outside (-pi, pi]")
        if self.v < 0:
            raise ValueError("linear velocity must be non-negative")

    def within(self, scan_max: float, v_max: float, omega_max: float) -> bool:
        return bool(np.max(self.scans) <= scan_max and self.v <= v_max and abs(self.omega) <= omega_max)


@dataclass(frozen=True, eq=False)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self) -> None:
        if np.any(np.abs(self.action) > 1.0):
            raise ValueError(f"action outside [-1, 1]: {self.action}")
        if not (np.all(np.isfinite(self.state)) and np.all(np.isfinite(self.next_state))):
            raise ValueError("transition holds non-finite state values")
        if not math.isfinite(self.reward):
            raise ValueError("transition holds a non-finite reward")


@dataclass(frozen=True)
class EvalTask:
    name: str
    scenario: str
    start: Vec2
    heading: float
    goal: Vec2
    t_max: int
    group: str = "native"


@dataclass
class TrajectoryRecord:
    task: str
    rows: list[dict[str, float]] = field(default_factory=list)
    rho: float = 1.0
    outcome: str = "timeout"
    steps: int = 0
