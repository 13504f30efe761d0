from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .augment import AugmentConfig
from .config import (
    AUGMENT_PROBABILITY,
    AUGMENT_UPPER_BOUND,
    BATCH_SIZE,
    BUFFER_CAPACITY,
    CONTROL_DT,
    DEFAULT_OUT_DIR,
    DEFAULT_SEED,
    DEFAULT_TASK_SUITE,
    DROPOUT_RATE,
    EVAL_INTERVAL,
    GOAL_DISTANCE_LIMIT,
    GOAL_TOLERANCE,
    HIDDEN_SIZES,
    LEARNING_RATE,
    LIDAR_MAX_RANGE,
    MAX_EPISODE_STEPS,
    OMEGA_MAX,
    REWARD_KIND,
    RNG_STREAMS,
    ROBOT_RADIUS,
    SAC_ALPHA,
    SAC_GAMMA,
    SAC_TAU,
    TOTAL_STEPS,
    V_MAX,
    WARMUP_EPISODES,
)
from .errors import ConfigError
from .metrics import RewardConfig
from .perception import SensorLimits
from .sac import SacConfig
from .simcore import EpisodeConfig

PATH_KEYS = ("scenario", "tasks", "resume", "out")
INPUT_PATH_KEYS = ("scenario", "tasks", "resume")


@dataclass
class RunConfig:
    scenario: Path | None = None
    tasks: Path | None = DEFAULT_TASK_SUITE
    reward: str = REWARD_KIND
    augment_p: float = AUGMENT_PROBABILITY
    augment_m: float = AUGMENT_UPPER_BOUND
    dt: float = CONTROL_DT
    max_steps: int = MAX_EPISODE_STEPS
    goal_tolerance: float = GOAL_TOLERANCE
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX
    robot_radius: float = ROBOT_RADIUS
    hidden_sizes: tuple[int, ...] = field(default=HIDDEN_SIZES)
    learning_rate: float = LEARNING_RATE
    alpha: float = SAC_ALPHA
    gamma: float = SAC_GAMMA
    tau: float = SAC_TAU
    batch_size: int = BATCH_SIZE
    buffer_capacity: int = BUFFER_CAPACITY
    warmup_episodes: int = WARMUP_EPISODES
    dropout: float = DROPOUT_RATE
    seed: int = DEFAULT_SEED
    total_steps: int = TOTAL_STEPS
    eval_interval: int = EVAL_INTERVAL
    out: Path = DEFAULT_OUT_DIR
    resume: Path | None = None

    def episode_config(self) -> EpisodeConfig:
        return EpisodeConfig(
            dt=self.dt,
            max_steps=self.max_steps,
            goal_tolerance=self.goal_tolerance,
            v_max=self.v_max,
            omega_max=self.omega_max,
            robot_radius=self.robot_radius,
        )

    def sensor_limits(self) -> SensorLimits:
        return SensorLimits(
            scan_max=LIDAR_MAX_RANGE, d_max=GOAL_DISTANCE_LIMIT, v_max=self.v_max, omega_max=self.omega_max
        )

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(probability=self.augment_p, upper_bound=self.augment_m, limits=self.sensor_limits())

    def reward_config(self) -> RewardConfig:
        return RewardConfig(kind=self.reward)

    def sac_config(self) -> SacConfig:
        return SacConfig(
            hidden_sizes=tuple(self.hidden_sizes),
            learning_rate=self.learning_rate,
            alpha=self.alpha,
            gamma=self.gamma,
            tau=self.tau,
            batch_size=self.batch_size,
            buffer_capacity=self.buffer_capacity,
            warmup_episodes=self.warmup_episodes,
            dropout=self.dropout,
        )

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


RUN_CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _coerce(key: str, value: Any, base_dir: Path) -> Any:
    if value is None:
        return None
    if key in PATH_KEYS:
        path = Path(value)
        return path if path.is_absolute() else base_dir / path
    if key == "hidden_sizes":
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError("hidden_sizes: expected a non-empty list of layer widths")
        return tuple(int(v) for v in value)
    if key == "reward":
        return str(value)
    default = getattr(RunConfig, key)
    if isinstance(default, int) and isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    try:
        return int(value) if isinstance(default, int) else float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def read_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a flat mapping of run settings")
    unknown = sorted(set(doc) - set(RUN_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown key '{unknown[0]}'")
    base = path.resolve().parent
    return {key: _coerce(key, value, base) for key, value in doc.items()}


def validate_run_config(cfg: RunConfig) -> RunConfig:
    if cfg.scenario is None:
        raise ConfigError("scenario: a scenario file is required")
    for key in INPUT_PATH_KEYS:
        path = getattr(cfg, key)
        if path is not None and not Path(path).exists():
            raise ConfigError(f"{key}: path does not exist: {path}")
    if cfg.total_steps < 1 or cfg.eval_interval < 1:
        raise ConfigError("total_steps and eval_interval must be positive")
    try:
        cfg.episode_config()
        cfg.augment_config()
        cfg.reward_config()
        cfg.sac_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.dropout < 0 or cfg.dropout >= 1:
        raise ConfigError("dropout: rate must lie in [0, 1)")
    return cfg


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """File values first, then non-None overrides (command-line flags win)."""
    values = read_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if key not in RUN_CONFIG_KEYS:
            raise ConfigError(f"unknown override '{key}'")
        if value is not None:
            values[key] = _coerce(key, value, Path.cwd())
    return validate_run_config(replace(RunConfig(), **values))


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(child)) for name, child in zip(RNG_STREAMS, children)}


def stream_states(streams: dict[str, np.random.Generator]) -> dict[str, Any]:
    return {name: rng.bit_generator.state for name, rng in streams.items()}


def restore_streams(states: dict[str, Any]) -> dict[str, np.random.Generator]:
    streams = {}
    for name in RNG_STREAMS:
        if name not in states:
            raise ConfigError(f"missing random stream '{name}'")
        bit_gen = np.random.PCG64()
        bit_gen.state = states[name]
        streams[name] = np.random.Generator(bit_gen)
    return streams
