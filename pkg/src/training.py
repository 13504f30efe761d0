from __future__ import annotations

from dataclasses import asdict, dataclass, field
import logging
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import pandas as pd

from .augment import sample_rho, scale_action, scale_observation
from .checkpoint_store import (
    checkpoint_path,
    load_checkpoint,
    resolve_checkpoint,
    rng_states,
    save_checkpoint,
    save_latest,
)
from .config import (
    ACTION_DIM,
    EVAL_LOG_NAME,
    METRIC_LOG_COLUMNS,
    METRIC_LOG_NAME,
    POLICY_DELAY,
    STATE_DIM,
)
from .errors import CheckpointError
from .evalkit import EvalReport, TaskSuite, evaluate_policy, load_task_suite, write_report
from .metrics import compute_reward
from .models import RobotState, TerminalSignal, Transition
from .perception import SensorConfig, normalize, observe
from .run_config import RunConfig, make_streams, restore_streams, stream_states
from .sac import (
    ReplayBuffer,
    build_bundle,
    critic_update,
    map_action,
    policy_update,
    sample_action,
    soft_update,
    unmap_action,
)
from .simcore import EpisodeEngine, pid_policy
from .world import load_scenario

logger = logging.getLogger(__name__)

EVAL_LOG_COLUMNS = ["step", "task", "group", "outcome", "steps", "score"]


@dataclass(frozen=True)
class StepRecord:
    """What one environment step did, handed to training hooks."""

    episode: int
    step: int
    rho: float
    sim_state: RobotState
    sim_command: tuple[float, float]
    imagined_command: tuple[float, float]
    transition: Transition
    source: str
    signal: TerminalSignal


StepHook = Callable[[StepRecord], None]


@dataclass
class TrainingResult:
    out_dir: Path
    env_steps: int
    episodes: int
    critic_updates: int
    policy_updates: int
    checkpoints: list[Path] = field(default_factory=list)
    final_report: EvalReport | None = None

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / METRIC_LOG_NAME


def _append_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    pd.DataFrame(rows, columns=columns).to_csv(path, mode="a", header=not path.exists(), index=False)


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


class DelayedSacTrainer:
    """Episodic loop: collect in imagined space, then T critic and T // 2 policy updates."""

    def __init__(self, config: RunConfig, hooks: Iterable[StepHook] = ()):
        self.config = config
        self.hooks = list(hooks)
        self.scenario = load_scenario(Path(config.scenario))
        self.episode_cfg = config.episode_config()
        self.sac_cfg = config.sac_config()
        self.augment_cfg = config.augment_config()
        self.reward_cfg = config.reward_config()
        self.limits = config.sensor_limits()
        self.sensor = SensorConfig()
        self.suite: TaskSuite | None = (
            load_task_suite(Path(config.tasks), self.episode_cfg) if config.tasks is not None else None
        )

        self.out_dir = Path(config.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.seed = config.seed
        self.streams = make_streams(config.seed)
        self.bundle = build_bundle(self.sac_cfg, self.streams["init"])
        self.env_steps = 0
        self.episodes = 0
        self.critic_updates = 0
        self.policy_updates = 0
        if config.resume is not None:
            self._restore(resolve_checkpoint(Path(config.resume)))
        self.buffer = ReplayBuffer(self.sac_cfg.buffer_capacity, STATE_DIM, ACTION_DIM, self.streams["replay"])
        self.checkpoints: list[Path] = []
        self._pending_eval = float("nan")

    def _restore(self, path: Path) -> None:
        bundle, header = load_checkpoint(path)
        if bundle.policy.layer_sizes[0] != STATE_DIM:
            raise CheckpointError(
                "policy input width does not match the state layout", field="networks.policy.layer_sizes"
            )
        bundle.alpha, bundle.gamma, bundle.tau = self.sac_cfg.alpha, self.sac_cfg.gamma, self.sac_cfg.tau
        self.bundle = bundle
        self.streams = restore_streams(rng_states(header))
        self.seed = int(header["seed"])
        self.env_steps = int(header["step"])
        self.episodes = int(header.get("episodes", 0))
        self.critic_updates = int(header.get("critic_updates", 0))
        self.policy_updates = int(header.get("policy_updates", 0))
        logger.info("resumed from %s at step %d (episode %d)", path, self.env_steps, self.episodes)

    def _emit(self, record: StepRecord) -> None:
        for hook in self.hooks:
            hook(record)

    def _imagined_state(self, engine: EpisodeEngine):
        sv_sim = observe(self.scenario, engine.state, engine.goal, self.sensor)
        sv_img = scale_observation(sv_sim, engine.rho, self.augment_cfg)
        return sv_img, normalize(sv_img, self.limits), engine.rho * sv_sim.d_goal

    def run_episode(self) -> dict:
        world = self.streams["world"]
        policy_rng = self.streams["policy"]
        cfg = self.episode_cfg
        rho = sample_rho(world, self.augment_cfg)
        engine = EpisodeEngine.start(self.scenario, cfg, world, rho)
        warmup = self.episodes < self.sac_cfg.warmup_episodes
        episode = self.episodes + 1

        sv_img, s_img, d_prev = self._imagined_state(engine)
        ep_return = 0.0
        while not engine.signal.is_terminal:
            if warmup:
                action = unmap_action(*pid_policy(sv_img.d_goal, sv_img.phi_goal, cfg), cfg.v_max, cfg.omega_max)
                source = "pid"
            else:
                action, _ = sample_action(self.bundle.policy, s_img, policy_rng)
                source = "policy"
            imagined = map_action(action, cfg.v_max, cfg.omega_max)
            sim_command = scale_action(imagined, rho)
            before = engine.state
            signal = engine.step(sim_command)

            sv_img, s_next, d_next = self._imagined_state(engine)
            reward = compute_reward(d_prev, d_next, signal, self.reward_cfg)
            transition = Transition(state=s_img, action=action, reward=reward, next_state=s_next, done=signal.done_flag)
            self.buffer.add(transition)
            self.env_steps += 1
            ep_return += reward
            self._emit(
                StepRecord(
                    episode=episode,
                    step=self.env_steps,
                    rho=rho,
                    sim_state=before,
                    sim_command=sim_command,
                    imagined_command=imagined,
                    transition=transition,
                    source=source,
                    signal=signal,
                )
            )
            if self.env_steps % self.config.eval_interval == 0:
                self._evaluate_and_checkpoint()
            s_img, d_prev = s_next, d_next

        length = engine.steps
        losses = {"q": [], "value": [], "policy": []}
        if not warmup:
            losses = self._update(length)
        self.episodes = episode

        row = {
            "step": self.env_steps,
            "episode": episode,
            "rho": rho,
            "return": ep_return,
            "episode_length": length,
            "terminal_kind": engine.signal.value,
            "critic_updates": len(losses["value"]),
            "policy_updates": len(losses["policy"]),
            "q_loss": _mean(losses["q"]),
            "value_loss": _mean(losses["value"]),
            "policy_loss": _mean(losses["policy"]),
            "eval_score": self._pending_eval,
        }
        self._pending_eval = float("nan")
        _append_csv(self.out_dir / METRIC_LOG_NAME, [row], METRIC_LOG_COLUMNS)
        logger.debug(
            "episode %d: %s after %d steps, rho=%.3f, return=%.3f",
            episode,
            row["terminal_kind"],
            length,
            rho,
            ep_return,
        )
        return row

    def _update(self, n_steps: int) -> dict[str, list[float]]:
        policy_rng = self.streams["policy"]
        losses: dict[str, list[float]] = {"q": [], "value": [], "policy": []}
        for t in range(1, n_steps + 1):
            batch = self.buffer.sample(self.sac_cfg.batch_size)
            critic = critic_update(batch, self.bundle, policy_rng)
            soft_update(self.bundle.target_value, self.bundle.value, self.bundle.tau)
            self.critic_updates += 1
            losses["q"].append(0.5 * (critic.q1 + critic.q2))
            losses["value"].append(critic.value)
            if t % POLICY_DELAY == 0:
                losses["policy"].append(policy_update(batch, self.bundle, policy_rng))
                self.policy_updates += 1
        return losses

    def _checkpoint_extra(self) -> dict:
        return {
            "seed": self.seed,
            "step": self.env_steps,
            "episodes": self.episodes,
            "critic_updates": self.critic_updates,
            "policy_updates": self.policy_updates,
            "rng_states": stream_states(self.streams),
            "episode_config": asdict(self.episode_cfg),
            "scenario": self.scenario.name,
            "run_config": self.config.as_dict(),
        }

    def save(self) -> Path:
        path = save_checkpoint(checkpoint_path(self.out_dir, self.env_steps), self.bundle, self._checkpoint_extra())
        save_latest(self.out_dir, {"checkpoint": path.name, "step": self.env_steps})
        if not self.checkpoints or self.checkpoints[-1] != path:
            self.checkpoints.append(path)
        return path

    def evaluate(self) -> EvalReport | None:
        if self.suite is None:
            return None
        return evaluate_policy(self.bundle.policy.copy(), self.suite, self.episode_cfg, self.sensor, self.limits)

    def _evaluate_and_checkpoint(self) -> None:
        report = self.evaluate()
        if report is not None:
            self._pending_eval = report.mean_score
            rows = [{"step": self.env_steps, **r} for r in report.table.to_dict(orient="records")]
            _append_csv(self.out_dir / EVAL_LOG_NAME, rows, EVAL_LOG_COLUMNS)
            logger.info(
                "step %d: mean score %.4f, success rate %.2f", self.env_steps, report.mean_score, report.success_rate
            )
        self.save()

    def train(self) -> TrainingResult:
        logger.info(
            "training on %s: %d steps, P=%.2f, M=%.2f, reward=%s, seed=%d",
            self.scenario.name,
            self.config.total_steps,
            self.augment_cfg.probability,
            self.augment_cfg.upper_bound,
            self.reward_cfg.kind,
            self.seed,
        )
        while self.env_steps < self.config.total_steps:
            self.run_episode()
        # Always rewritten so the last checkpoint carries the post-update counters.
        self.save()

        final = self.evaluate()
        if final is not None:
            extra = {"step": self.env_steps, "checkpoint": self.checkpoints[-1].name}
            write_report(final, self.out_dir / "final", extra)
        return TrainingResult(
            out_dir=self.out_dir,
            env_steps=self.env_steps,
            episodes=self.episodes,
            critic_updates=self.critic_updates,
            policy_updates=self.policy_updates,
            checkpoints=list(self.checkpoints),
            final_report=final,
        )


def train(run_config: RunConfig, hooks: Iterable[StepHook] = ()) -> TrainingResult:
    return DelayedSacTrainer(run_config, hooks).train()
