from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from .checkpoint_store import load_checkpoint, resolve_checkpoint
from .config import GOAL_DISTANCE_LIMIT, LIDAR_MAX_RANGE, TRAJECTORY_COLUMNS
from .errors import ConfigError, ScenarioValidationError
from .metrics import TourResult, score, success_rates, summarize_tour
from .models import EvalTask, Scenario, TrajectoryRecord, Vec2
from .neural import DenseNet
from .perception import SensorConfig, SensorLimits, normalize, observe
from .sac import deterministic_action, map_action
from .simcore import EpisodeConfig, EpisodeEngine
from .world import collision_check, load_scenario

logger = logging.getLogger(__name__)

TASK_GROUPS = ("native", "scaled", "novel")
TASK_FIELDS = ("name", "scenario", "start", "goal", "t_max", "group")
REPORT_COLUMNS = ["task", "scenario", "group", "outcome", "steps", "t_max", "score"]


@dataclass
class TaskSuite:
    scenarios: dict[str, Scenario]
    tasks: list[EvalTask] = field(default_factory=list)

    def scenario_for(self, task: EvalTask) -> Scenario:
        return self.scenarios[task.scenario]


def _point(raw: Any, label: str, length: int) -> list[float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != length:
        raise ConfigError(f"{label}: expected {length} numbers, got {raw!r}")
    try:
        values = [float(v) for v in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: non-numeric value in {raw!r}") from exc
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{label}: non-finite value")
    return values


def validate_task(task: EvalTask, scenario: Scenario, cfg: EpisodeConfig = EpisodeConfig()) -> None:
    for label, point in (("start", task.start), ("goal", task.goal)):
        if not scenario.bounds.contains(point, strict=True):
            raise ScenarioValidationError(f"task {task.name}: {label} lies outside {scenario.name}")
        if collision_check(scenario, point, cfg.robot_radius):
            raise ScenarioValidationError(f"task {task.name}: {label} is not collision-free")
    if task.start.distance_to(task.goal) < cfg.goal_tolerance:
        raise ScenarioValidationError(f"task {task.name}: goal lies within the tolerance of the start")
    if task.t_max < 1:
        raise ScenarioValidationError(f"task {task.name}: t_max must be positive")


def parse_task_suite(doc: Any, base_dir: Path, cfg: EpisodeConfig = EpisodeConfig()) -> TaskSuite:
    if not isinstance(doc, dict) or "scenarios" not in doc or "tasks" not in doc:
        raise ConfigError("task suite needs 'scenarios' and 'tasks' sections")
    raw_scenarios = doc["scenarios"]
    if not isinstance(raw_scenarios, dict) or not raw_scenarios:
        raise ConfigError("scenarios: expected a mapping of name -> scenario file")

    scenarios: dict[str, Scenario] = {}
    for name, rel in raw_scenarios.items():
        path = Path(rel) if Path(rel).is_absolute() else base_dir / rel
        if not path.exists():
            raise ConfigError(f"scenarios.{name}: file not found: {path}")
        scenarios[str(name)] = load_scenario(path)

    raw_tasks = doc["tasks"]
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise ConfigError("tasks: expected a non-empty list")
    tasks: list[EvalTask] = []
    for i, raw in enumerate(raw_tasks):
        if not isinstance(raw, dict):
            raise ConfigError(f"tasks[{i}]: expected a mapping")
        unknown = sorted(set(raw) - set(TASK_FIELDS))
        if unknown:
            raise ConfigError(f"tasks[{i}]: unknown field '{unknown[0]}'")
        name = str(raw.get("name", f"task{i}"))
        scenario = str(raw.get("scenario", ""))
        if scenario not in scenarios:
            raise ConfigError(f"tasks[{i}]: unknown scenario '{scenario}'")
        group = str(raw.get("group", "native"))
        if group not in TASK_GROUPS:
            raise ConfigError(f"tasks[{i}]: group must be one of {TASK_GROUPS}")
        sx, sy, heading = _point(raw.get("start"), f"tasks[{i}].start", 3)
        gx, gy = _point(raw.get("goal"), f"tasks[{i}].goal", 2)
        task = EvalTask(
            name=name,
            scenario=scenario,
            start=Vec2(sx, sy),
            heading=heading,
            goal=Vec2(gx, gy),
            t_max=int(raw.get("t_max", cfg.max_steps)),
            group=group,
        )
        validate_task(task, scenarios[scenario], cfg)
        tasks.append(task)

    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise ConfigError("tasks: names must be unique")
    return TaskSuite(scenarios=scenarios, tasks=tasks)


def load_task_suite(path: Path, cfg: EpisodeConfig = EpisodeConfig()) -> TaskSuite:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"task suite not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return parse_task_suite(doc, path.resolve().parent, cfg)


def default_limits(cfg: EpisodeConfig) -> SensorLimits:
    return SensorLimits(scan_max=LIDAR_MAX_RANGE, d_max=GOAL_DISTANCE_LIMIT, v_max=cfg.v_max, omega_max=cfg.omega_max)


def _trajectory_row(engine: EpisodeEngine) -> dict[str, float]:
    st = engine.state
    return {
        "t": engine.steps * engine.cfg.dt,
        "x": st.position.x,
        "y": st.position.y,
        "theta": st.heading,
        "v": st.v,
        "omega": st.omega,
        "d_g": engine.rho * st.position.distance_to(engine.goal),
    }


def drive(
    policy: DenseNet,
    engine: EpisodeEngine,
    sensor: SensorConfig,
    limits: SensorLimits,
    record: TrajectoryRecord | None = None,
) -> EpisodeEngine:
    """Run `engine` to termination with the deterministic policy."""
    if record is not None:
        record.rows.append(_trajectory_row(engine))
    while not engine.signal.is_terminal:
        sv = observe(engine.scenario, engine.state, engine.goal, sensor)
        a = deterministic_action(policy, normalize(sv, limits))
        engine.step(map_action(a, engine.cfg.v_max, engine.cfg.omega_max))
        if record is not None:
            record.rows.append(_trajectory_row(engine))
    return engine


def rollout_task(
    policy: DenseNet,
    scenario: Scenario,
    task: EvalTask,
    cfg: EpisodeConfig = EpisodeConfig(),
    sensor: SensorConfig = SensorConfig(),
    limits: SensorLimits | None = None,
) -> TrajectoryRecord:
    task_cfg = replace(cfg, max_steps=task.t_max)
    engine = EpisodeEngine.from_pose(scenario, task_cfg, task.start, task.heading, task.goal)
    record = TrajectoryRecord(task=task.name, rho=1.0)
    drive(policy, engine, sensor, limits or default_limits(cfg), record)
    record.outcome = engine.signal.outcome
    record.steps = engine.steps
    return record


@dataclass
class EvalReport:
    table: pd.DataFrame
    trajectories: list[TrajectoryRecord] = field(default_factory=list)

    @property
    def mean_score(self) -> float:
        return float(self.table["score"].mean()) if not self.table.empty else float("nan")

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.table["outcome"] == "success")) if not self.table.empty else float("nan")

    def payload(self) -> dict[str, Any]:
        return {
            "tasks": self.table.to_dict(orient="records"),
            "mean_score": self.mean_score,
            "success_rate": self.success_rate,
            "groups": success_rates(self.table).to_dict(orient="records"),
        }


def evaluate_policy(
    policy: DenseNet,
    suite: TaskSuite,
    cfg: EpisodeConfig = EpisodeConfig(),
    sensor: SensorConfig = SensorConfig(),
    limits: SensorLimits | None = None,
) -> EvalReport:
    """Each task once, deterministic actions, no augmentation."""
    limits = limits or default_limits(cfg)
    rows, trajectories = [], []
    for task in suite.tasks:
        record = rollout_task(policy, suite.scenario_for(task), task, cfg, sensor, limits)
        trajectories.append(record)
        rows.append(
            {
                "task": task.name,
                "scenario": task.scenario,
                "group": task.group,
                "outcome": record.outcome,
                "steps": record.steps,
                "t_max": task.t_max,
                "score": score(record.outcome, record.steps, task.t_max),
            }
        )
    table = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    return EvalReport(table=table, trajectories=trajectories)


def write_report(report: EvalReport, out_dir: Path, extra: dict[str, Any] | None = None) -> Path:
    out_dir = Path(out_dir)
    traj_dir = out_dir / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    report.table.to_csv(out_dir / "report.csv", index=False)
    for record in report.trajectories:
        pd.DataFrame(record.rows, columns=TRAJECTORY_COLUMNS).to_csv(traj_dir / f"{record.task}.csv", index=False)
    payload = {**(extra or {}), **report.payload()}
    path = out_dir / "report.json"
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
    return path


def episode_config_from_header(header: dict[str, Any]) -> EpisodeConfig:
    stored = header.get("episode_config")
    if not isinstance(stored, dict):
        logger.warning("checkpoint header has no episode_config; using default episode limits")
        return EpisodeConfig()
    return EpisodeConfig(**stored)


def run_eval(
    checkpoint: Path,
    suite: TaskSuite | Path,
    out_dir: Path | None = None,
    cfg: EpisodeConfig | None = None,
) -> EvalReport:
    path = resolve_checkpoint(checkpoint)
    bundle, header = load_checkpoint(path)
    cfg = cfg or episode_config_from_header(header)
    if not isinstance(suite, TaskSuite):
        suite = load_task_suite(suite, cfg)
    report = evaluate_policy(bundle.policy, suite, cfg)
    logger.info("evaluated %s on %d tasks: mean score %.4f", path.name, len(suite.tasks), report.mean_score)
    if out_dir is not None:
        write_report(report, out_dir, {"checkpoint": str(path), "step": header.get("step")})
    return report


def run_tour(
    policy: DenseNet,
    scenario: Scenario,
    start: Vec2,
    heading: float,
    goals: list[Vec2],
    cfg: EpisodeConfig = EpisodeConfig(),
    sensor: SensorConfig = SensorConfig(),
    limits: SensorLimits | None = None,
) -> TourResult:
    """Visit `goals` in order; a collision ends the tour, a timed-out leg moves on."""
    if not goals:
        raise ValueError("a tour needs at least one goal")
    limits = limits or default_limits(cfg)
    engine = EpisodeEngine.from_pose(scenario, cfg, start, heading, goals[0])
    legs: list[tuple[str, int]] = []
    for goal in goals:
        engine = EpisodeEngine(scenario=scenario, cfg=cfg, rho=1.0, state=engine.state, goal=goal)
        drive(policy, engine, sensor, limits)
        legs.append((engine.signal.outcome, engine.steps))
        if engine.signal.outcome == "collision":
            break
    return summarize_tour(legs, cfg.dt, len(goals))
