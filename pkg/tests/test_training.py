from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import src.training as training
from src.augment import scale_action
from src.checkpoint_store import load_checkpoint, load_latest
from src.config import METRIC_LOG_COLUMNS
from src.run_config import RunConfig
from src.sac import map_action
from src.training import DelayedSacTrainer, train

ROOT = Path(__file__).resolve().parents[1]


def _config(out, **overrides):
    base = {
        "scenario": ROOT / "scenarios" / "env1.yaml",
        "tasks": None,
        "hidden_sizes": (8, 8),
        "batch_size": 8,
        "buffer_capacity": 500,
        "max_steps": 20,
        "warmup_episodes": 0,
        "total_steps": 40,
        "eval_interval": 1_000,
        "out": out,
    }
    base.update(overrides)
    return RunConfig(**base)


def _suite(tmp_path):
    path = tmp_path / "suite.yaml"
    path.write_text(
        f"scenarios:\n  env1: {ROOT / 'scenarios' / 'env1.yaml'}\n"
        "tasks:\n  - {name: short, scenario: env1, start: [1.0, 4.0, 0.0], goal: [6.0, 4.0], t_max: 15}\n",
        encoding="utf-8",
    )
    return path


def test_update_accounting_follows_episode_length(tmp_path, monkeypatch):
    draws = []

    def counting_rho(rng, cfg):
        draws.append(1.0 + len(draws))
        return draws[-1]

    monkeypatch.setattr(training, "sample_rho", counting_rho)
    records = []
    trainer = DelayedSacTrainer(_config(tmp_path), hooks=[records.append])
    rows = [trainer.run_episode() for _ in range(3)]

    assert draws == [1.0, 2.0, 3.0]
    lengths = [row["episode_length"] for row in rows]
    assert sum(lengths) == trainer.env_steps == len(records)
    assert trainer.critic_updates == sum(lengths)
    assert trainer.policy_updates == sum(n // 2 for n in lengths)
    for row in rows:
        assert row["critic_updates"] == row["episode_length"]
        assert row["policy_updates"] == row["episode_length"] // 2
    assert [row["rho"] for row in rows] == draws

    for record in records:
        assert record.rho == draws[record.episode - 1]
        assert record.source == "policy"
        assert np.all(np.abs(record.transition.action) <= 1.0)
        imagined = map_action(record.transition.action)
        assert imagined == pytest.approx(record.imagined_command, abs=1e-12)
        assert scale_action(imagined, record.rho) == pytest.approx(record.sim_command, abs=1e-9)
        assert record.transition.done == record.signal.done_flag

    last_of_episode = {r.episode: r for r in records}
    assert all(r.signal.is_terminal for r in last_of_episode.values())
    assert sum(r.signal.is_terminal for r in records) == 3


def test_warmup_uses_the_pid_controller_without_updates(tmp_path):
    records = []
    trainer = DelayedSacTrainer(_config(tmp_path, warmup_episodes=2), hooks=[records.append])
    policy = [p.copy() for p in trainer.bundle.policy.parameters()]
    for _ in range(2):
        row = trainer.run_episode()
        assert row["critic_updates"] == 0
    assert {r.source for r in records} == {"pid"}
    assert trainer.critic_updates == trainer.policy_updates == 0
    assert len(trainer.buffer) == trainer.env_steps
    for a, b in zip(policy, trainer.bundle.policy.parameters()):
        np.testing.assert_array_equal(a, b)

    trainer.run_episode()
    assert records[-1].source == "policy"
    assert trainer.critic_updates > 0


def test_no_augmentation_keeps_rho_at_one(tmp_path):
    records = []
    trainer = DelayedSacTrainer(_config(tmp_path, augment_p=0.0), hooks=[records.append])
    for _ in range(3):
        trainer.run_episode()
    assert {r.rho for r in records} == {1.0}
    assert all(r.sim_command == r.imagined_command for r in records)


def test_training_is_reproducible(tmp_path):
    first = train(_config(tmp_path / "a", augment_p=1.0))
    second = train(_config(tmp_path / "b", augment_p=1.0))
    assert first.env_steps == second.env_steps >= 40
    assert first.metrics_path.read_bytes() == second.metrics_path.read_bytes()

    metrics = pd.read_csv(first.metrics_path)
    assert list(metrics.columns) == METRIC_LOG_COLUMNS
    assert len(metrics) == first.episodes
    assert metrics["step"].iloc[-1] == first.env_steps
    assert metrics["rho"].between(1.0, 4.0).all()


def test_periodic_checkpoints_and_evaluations(tmp_path):
    config = _config(tmp_path / "run", tasks=_suite(tmp_path), eval_interval=10, total_steps=25)
    result = train(config)

    evals = pd.read_csv(tmp_path / "run" / "evals.csv")
    assert sorted(evals["step"].unique())[:2] == [10, 20]
    assert set(evals["task"]) == {"short"}
    names = [p.name for p in result.checkpoints]
    assert names[:2] == ["step_000000010.npz", "step_000000020.npz"]
    assert load_latest(tmp_path / "run")["checkpoint"] == names[-1]
    assert (tmp_path / "run" / "final" / "report.json").exists()
    assert result.final_report is not None

    metrics = pd.read_csv(result.metrics_path)
    assert metrics["eval_score"].notna().sum() >= 1

    _, header = load_checkpoint(result.checkpoints[-1])
    assert header["step"] == result.env_steps
    assert header["episodes"] == result.episodes
    assert header["critic_updates"] == result.critic_updates
    assert header["episode_config"]["max_steps"] == 20
    assert header["run_config"]["eval_interval"] == 10
    assert header["run_config"]["hidden_sizes"] == [8, 8]
    assert header["run_config"]["tasks"] == str(_suite(tmp_path))


def test_resume_continues_counters(tmp_path):
    first = train(_config(tmp_path / "a", total_steps=30))
    resumed = train(_config(tmp_path / "b", total_steps=60, resume=first.checkpoints[-1]))
    assert resumed.env_steps >= 60
    assert resumed.episodes > first.episodes
    assert resumed.critic_updates > first.critic_updates

    metrics = pd.read_csv(resumed.metrics_path)
    assert metrics["episode"].iloc[0] == first.episodes + 1
    assert metrics["step"].iloc[0] > first.env_steps
