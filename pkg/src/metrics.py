from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import DENSE_C1, R_CRASH, R_REACH, REWARD_KIND
from .models import TerminalSignal

REWARD_KINDS = ("dense", "sparse")
OUTCOMES = ("success", "collision", "timeout")


@dataclass(frozen=True)
class RewardConfig:
    kind: str = REWARD_KIND
    r_reach: float = R_REACH
    r_crash: float = R_CRASH
    c1: float = DENSE_C1

    def __post_init__(self) -> None:
        if self.kind not in REWARD_KINDS:
            raise ValueError(f"reward kind must be one of {REWARD_KINDS}, got '{self.kind}'")
        if not self.r_reach > 0 > self.r_crash:
            raise ValueError("reward magnitudes need r_reach > 0 > r_crash")


def sparse_reward(terminal: TerminalSignal, cfg: RewardConfig = RewardConfig()) -> float:
    if terminal is TerminalSignal.GOAL:
        return cfg.r_reach
    if terminal is TerminalSignal.COLLISION:
        return cfg.r_crash
    return 0.0


def dense_reward(
    prev_d: float, next_d: float, terminal: TerminalSignal, cfg: RewardConfig = RewardConfig()
) -> float:
    # Timeout pays the progress term like any other step.
    if terminal in (TerminalSignal.GOAL, TerminalSignal.COLLISION):
        return sparse_reward(terminal, cfg)
    return cfg.c1 * (prev_d - next_d)


def compute_reward(prev_d: float, next_d: float, terminal: TerminalSignal, cfg: RewardConfig) -> float:
    if cfg.kind == "dense":
        return dense_reward(prev_d, next_d, terminal, cfg)
    return sparse_reward(terminal, cfg)


def score(outcome: str, steps: int, t_max: int) -> float:
    if outcome not in OUTCOMES:
        raise ValueError(f"unknown outcome '{outcome}'")
    if outcome != "success":
        return -1.0
    if not 0 < steps <= t_max:
        raise ValueError(f"successful episode needs 0 < steps <= t_max, got steps={steps}, t_max={t_max}")
    return 1.0 - 2.0 * steps / t_max


def success_rates(table: pd.DataFrame, by: str = "group") -> pd.DataFrame:
    """Share of `success` outcomes and mean score per `by` value."""
    if table.empty:
        return pd.DataFrame(columns=[by, "tasks", "success_rate", "mean_score"])
    grouped = table.groupby(by, sort=True)
    out = pd.DataFrame(
        {
            "tasks": grouped.size(),
            "success_rate": grouped["outcome"].apply(lambda s: float(np.mean(s == "success"))),
            "mean_score": grouped["score"].mean(),
        }
    )
    return out.reset_index()


@dataclass
class TourResult:
    goals_reached: int
    goals_total: int
    navigation_time: float
    collisions: int
    legs: list[str]

    @property
    def completed(self) -> bool:
        return self.goals_reached == self.goals_total

    def as_dict(self) -> dict[str, object]:
        return {
            "goals_reached": self.goals_reached,
            "goals_total": self.goals_total,
            "navigation_time": round(self.navigation_time, 6),
            "collisions": self.collisions,
            "legs": list(self.legs),
        }


def summarize_tour(legs: list[tuple[str, int]], dt: float, goals_total: int) -> TourResult:
    return TourResult(
        goals_reached=sum(1 for outcome, _ in legs if outcome == "success"),
        goals_total=goals_total,
        navigation_time=sum(steps for _, steps in legs) * dt,
        collisions=sum(1 for outcome, _ in legs if outcome == "collision"),
        legs=[outcome for outcome, _ in legs],
    )
