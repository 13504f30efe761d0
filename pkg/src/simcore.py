from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .config import (
    ARC_OMEGA_EPS,
    CONTROL_DT,
    GOAL_TOLERANCE,
    GOAL_WINDOW,
    MAX_EPISODE_STEPS,
    OMEGA_MAX,
    PID_GAIN_OMEGA,
    PID_GAIN_V,
    ROBOT_RADIUS,
    V_MAX,
)
from .augment import scaled_radius
from .errors import EpisodeStateError
from .models import Rect, RobotState, Scenario, TerminalSignal, Vec2
from .world import collision_check, sample_free_pose, wrap_angle


@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = CONTROL_DT
    max_steps: int = MAX_EPISODE_STEPS
    goal_tolerance: float = GOAL_TOLERANCE
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX
    robot_radius: float = ROBOT_RADIUS

    def __post_init__(self) -> None:
        for name in ("dt", "goal_tolerance", "v_max", "omega_max", "robot_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"episode config field '{name}' must be positive")
        if self.max_steps < 1:
            raise ValueError("episode config field 'max_steps' must be at least 1")


def clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


def step_kinematics(state: RobotState, command: tuple[float, float], dt: float) -> RobotState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, omega = command
    x, y, theta = state.position.x, state.position.y, state.heading
    if abs(omega) >= ARC_OMEGA_EPS:
        r = v / omega
        x_next = x + r * (math.sin(theta + omega * dt) - math.sin(theta))
        y_next = y - r * (math.cos(theta + omega * dt) - math.cos(theta))
    else:
        x_next = x + v * dt * math.cos(theta)
        y_next = y + v * dt * math.sin(theta)
    return replace(
        state,
        position=Vec2(x_next, y_next),
        heading=wrap_angle(theta + omega * dt),
        v=v,
        omega=omega,
    )


def reset_episode(
    s: Scenario, cfg: EpisodeConfig, rng: np.random.Generator, rho: float
) -> tuple[RobotState, Vec2]:
    radius = scaled_radius(cfg.robot_radius, rho)
    start = sample_free_pose(s, rng, radius, s.spawn_window)
    heading = wrap_angle(float(rng.uniform(-math.pi, math.pi)))

    window = Rect.centered(start, GOAL_WINDOW).intersection(s.bounds) or s.bounds
    # A goal already inside the tolerance would end the episode before the first action.
    goal = sample_free_pose(
        s, rng, radius, window, accept=lambda p: rho * start.distance_to(p) >= cfg.goal_tolerance
    )
    state = RobotState(position=start, heading=heading, v=0.0, omega=0.0, radius=radius)
    return state, goal


def check_terminal(
    state: RobotState,
    goal: Vec2,
    s: Scenario,
    cfg: EpisodeConfig,
    rho: float,
    steps_taken: int,
) -> TerminalSignal:
    if rho * state.position.distance_to(goal) < cfg.goal_tolerance:
        return TerminalSignal.GOAL
    if collision_check(s, state.position, scaled_radius(cfg.robot_radius, rho)):
        return TerminalSignal.COLLISION
    if steps_taken >= cfg.max_steps:
        return TerminalSignal.TIMEOUT
    return TerminalSignal.NONE


def pid_policy(d_goal: float, phi_goal: float, cfg: EpisodeConfig) -> tuple[float, float]:
    omega = clamp(PID_GAIN_OMEGA * phi_goal, -cfg.omega_max, cfg.omega_max)
    v = clamp(PID_GAIN_V * d_goal * max(0.0, math.cos(phi_goal)), 0.0, cfg.v_max)
    return v, omega


@dataclass
class EpisodeEngine:
    """Mutable owner of one episode's robot state, goal and step counter."""

    scenario: Scenario
    cfg: EpisodeConfig
    rho: float
    state: RobotState
    goal: Vec2
    steps: int = 0
    signal: TerminalSignal = field(default=TerminalSignal.NONE)

    @classmethod
    def start(cls, s: Scenario, cfg: EpisodeConfig, rng: np.random.Generator, rho: float) -> EpisodeEngine:
        state, goal = reset_episode(s, cfg, rng, rho)
        return cls(scenario=s, cfg=cfg, rho=rho, state=state, goal=goal)

    @classmethod
    def from_pose(
        cls, s: Scenario, cfg: EpisodeConfig, start: Vec2, heading: float, goal: Vec2, rho: float = 1.0
    ) -> EpisodeEngine:
        state = RobotState(
            position=start,
            heading=wrap_angle(heading),
            v=0.0,
            omega=0.0,
            radius=scaled_radius(cfg.robot_radius, rho),
        )
        return cls(scenario=s, cfg=cfg, rho=rho, state=state, goal=goal)

    def step(self, command: tuple[float, float]) -> TerminalSignal:
        if self.signal.is_terminal:
            raise EpisodeStateError("episode already terminated")
        v, omega = command
        if not (0.0 <= v <= self.cfg.v_max and abs(omega) <= self.cfg.omega_max):
            raise ValueError(f"command ({v}, {omega}) outside the velocity limits")
        self.state = step_kinematics(self.state, command, self.cfg.dt)
        self.steps += 1
        self.signal = check_terminal(self.state, self.goal, self.scenario, self.cfg, self.rho, self.steps)
        return self.signal
