from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .config import (
    ACTION_DIM,
    BATCH_SIZE,
    BUFFER_CAPACITY,
    DROPOUT_RATE,
    HIDDEN_SIZES,
    LEARNING_RATE,
    LOG_STD_MAX,
    LOG_STD_MIN,
    OMEGA_MAX,
    SAC_ALPHA,
    SAC_GAMMA,
    SAC_TAU,
    STATE_DIM,
    TANH_EPS,
    V_MAX,
    WARMUP_EPISODES,
)
from .errors import ShapeError, TrainingError
from .models import Transition
from .neural import DenseNet, OptimState, backward, forward, init_dense_net, init_optim, optimizer_step

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SacConfig:
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES
    learning_rate: float = LEARNING_RATE
    alpha: float = SAC_ALPHA
    gamma: float = SAC_GAMMA
    tau: float = SAC_TAU
    batch_size: int = BATCH_SIZE
    buffer_capacity: int = BUFFER_CAPACITY
    warmup_episodes: int = WARMUP_EPISODES
    dropout: float = DROPOUT_RATE
    log_std_min: float = LOG_STD_MIN
    log_std_max: float = LOG_STD_MAX

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ValueError("batch size and buffer capacity must be positive")
        if self.alpha < 0 or self.learning_rate <= 0:
            raise ValueError("alpha must be non-negative and the learning rate positive")
        if self.warmup_episodes < 0:
            raise ValueError("warmup_episodes must be non-negative")


@dataclass
class NetworkBundle:
    policy: DenseNet
    value: DenseNet
    target_value: DenseNet
    q1: DenseNet
    q2: DenseNet
    policy_opt: OptimState
    value_opt: OptimState
    q1_opt: OptimState
    q2_opt: OptimState
    alpha: float = SAC_ALPHA
    gamma: float = SAC_GAMMA
    tau: float = SAC_TAU
    log_std_min: float = LOG_STD_MIN
    log_std_max: float = LOG_STD_MAX

    NETWORKS = ("policy", "value", "target_value", "q1", "q2")
    OPTIMIZERS = {"policy_opt": "policy", "value_opt": "value", "q1_opt": "q1", "q2_opt": "q2"}

    @property
    def state_dim(self) -> int:
        return self.policy.layer_sizes[0]


def build_bundle(
    cfg: SacConfig, rng: np.random.Generator, state_dim: int = STATE_DIM, action_dim: int = ACTION_DIM
) -> NetworkBundle:
    hidden = tuple(cfg.hidden_sizes)
    policy = init_dense_net((state_dim, *hidden, 2 * action_dim), rng, dropout=cfg.dropout)
    value = init_dense_net((state_dim, *hidden, 1), rng, dropout=cfg.dropout)
    q1 = init_dense_net((state_dim + action_dim, *hidden, 1), rng, dropout=cfg.dropout)
    q2 = init_dense_net((state_dim + action_dim, *hidden, 1), rng, dropout=cfg.dropout)
    return NetworkBundle(
        policy=policy,
        value=value,
        target_value=value.copy(),
        q1=q1,
        q2=q2,
        policy_opt=init_optim(policy, cfg.learning_rate),
        value_opt=init_optim(value, cfg.learning_rate),
        q1_opt=init_optim(q1, cfg.learning_rate),
        q2_opt=init_optim(q2, cfg.learning_rate),
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        tau=cfg.tau,
        log_std_min=cfg.log_std_min,
        log_std_max=cfg.log_std_max,
    )


def _squashed(
    mu: np.ndarray, raw_log_std: np.ndarray, zeta: np.ndarray, bounds: tuple[float, float]
) -> dict[str, np.ndarray]:
    log_std = np.clip(raw_log_std, *bounds)
    std = np.exp(log_std)
    u = mu + std * zeta
    a = np.tanh(u)
    gaussian = np.sum(-0.5 * zeta**2 - log_std - LOG_SQRT_2PI, axis=-1)
    correction = np.sum(np.log(1.0 - a**2 + TANH_EPS), axis=-1)
    return {"action": a, "log_prob": gaussian - correction, "log_std": log_std, "std": std}


def sample_action(
    policy: DenseNet,
    s: np.ndarray,
    rng: np.random.Generator,
    log_std_bounds: tuple[float, float] = (LOG_STD_MIN, LOG_STD_MAX),
) -> tuple[np.ndarray, np.ndarray | float]:
    out, _ = forward(policy, s)
    k = out.shape[-1] // 2
    zeta = rng.standard_normal(out[..., :k].shape)
    sample = _squashed(out[..., :k], out[..., k:], zeta, log_std_bounds)
    log_prob = sample["log_prob"]
    return sample["action"], (float(log_prob) if np.ndim(log_prob) == 0 else log_prob)


def deterministic_action(policy: DenseNet, s: np.ndarray) -> np.ndarray:
    out, _ = forward(policy, s)
    return np.tanh(out[..., : out.shape[-1] // 2])


def map_action(a: np.ndarray, v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> tuple[float, float]:
    return (float(a[0]) + 1.0) / 2.0 * v_max, float(a[1]) * omega_max


def unmap_action(v: float, omega: float, v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> np.ndarray:
    """Clamped inverse of map_action."""
    return np.clip(np.array([2.0 * v / v_max - 1.0, omega / omega_max]), -1.0, 1.0)


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """Fixed-capacity ring; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        if t.state.shape != self.states.shape[1:] or t.action.shape != self.actions.shape[1:]:
            raise ShapeError(f"transition shapes {t.state.shape}/{t.action.shape} do not fit the buffer")
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = float(t.done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if self.size == 0:
            raise TrainingError("cannot sample from an empty replay buffer")
        idx = self.rng.integers(0, self.size, size=batch_size)
        return Batch(
            states=self.states[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_states=self.next_states[idx],
            dones=self.dones[idx],
        )

    def transitions(self) -> list[Transition]:
        start = self._next if self.size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self.size)]
        return [
            Transition(
                state=self.states[i].copy(),
                action=self.actions[i].copy(),
                reward=float(self.rewards[i]),
                next_state=self.next_states[i].copy(),
                done=bool(self.dones[i]),
            )
            for i in order
        ]


@dataclass
class CriticLosses:
    q1: float
    q2: float
    value: float


def critic_targets(batch: Batch, bundle: NetworkBundle, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Q target r + gamma(1-d)V_target(s') and V target min Q(s, a~) - alpha log pi(a~|s)."""
    v_next, _ = forward(bundle.target_value, batch.next_states)
    y_q = batch.rewards + bundle.gamma * (1.0 - batch.dones) * v_next[:, 0]

    fresh, log_prob = sample_action(bundle.policy, batch.states, rng, (bundle.log_std_min, bundle.log_std_max))
    q_in = np.concatenate([batch.states, fresh], axis=1)
    q1_new, _ = forward(bundle.q1, q_in)
    q2_new, _ = forward(bundle.q2, q_in)
    y_v = np.minimum(q1_new[:, 0], q2_new[:, 0]) - bundle.alpha * log_prob
    return y_q, y_v


def _regress(
    net: DenseNet, opt: OptimState, inputs: np.ndarray, target: np.ndarray, rng: np.random.Generator, label: str
) -> float:
    pred, cache = forward(net, inputs, rng)
    err = pred[:, 0] - target
    loss = float(np.mean(err**2))
    if not math.isfinite(loss):
        raise TrainingError(f"{label}: non-finite loss")
    grads, _ = backward(net, cache, (2.0 / len(target)) * err[:, None])
    optimizer_step(net, grads, opt, label)
    return loss


def critic_update(batch: Batch, bundle: NetworkBundle, rng: np.random.Generator) -> CriticLosses:
    if len(batch) < 1:
        raise TrainingError("critic update needs a non-empty batch")
    y_q, y_v = critic_targets(batch, bundle, rng)
    q_in = np.concatenate([batch.states, batch.actions], axis=1)
    return CriticLosses(
        q1=_regress(bundle.q1, bundle.q1_opt, q_in, y_q, rng, "q1"),
        q2=_regress(bundle.q2, bundle.q2_opt, q_in, y_q, rng, "q2"),
        value=_regress(bundle.value, bundle.value_opt, batch.states, y_v, rng, "value"),
    )


def policy_objective(
    policy: DenseNet,
    bundle: NetworkBundle,
    states: np.ndarray,
    zeta: np.ndarray,
    rng: np.random.Generator | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Reparameterized loss mean(alpha log pi(a~|s) - min Q(s, a~)) and its gradient w.r.t. `policy`."""
    out, cache = forward(policy, states, rng)
    k = out.shape[1] // 2
    mu, raw = out[:, :k], out[:, k:]
    sample = _squashed(mu, raw, zeta, (bundle.log_std_min, bundle.log_std_max))
    a, std = sample["action"], sample["std"]

    q_in = np.concatenate([states, a], axis=1)
    q1v, c1 = forward(bundle.q1, q_in)
    q2v, c2 = forward(bundle.q2, q_in)
    use_q1 = q1v[:, 0] <= q2v[:, 0]
    q_min = np.where(use_q1, q1v[:, 0], q2v[:, 0])

    n = len(states)
    loss = float(np.mean(bundle.alpha * sample["log_prob"] - q_min))

    _, gin1 = backward(bundle.q1, c1, np.where(use_q1, -1.0 / n, 0.0)[:, None])
    _, gin2 = backward(bundle.q2, c2, np.where(use_q1, 0.0, -1.0 / n)[:, None])
    dq_da = (gin1 + gin2)[:, states.shape[1] :]

    one_minus = 1.0 - a**2
    dlogp_du = 2.0 * a * one_minus / (one_minus + TANH_EPS)
    dl_du = (bundle.alpha / n) * dlogp_du + dq_da * one_minus
    dl_dlog_std = -(bundle.alpha / n) + dl_du * std * zeta
    inside = (raw >= bundle.log_std_min) & (raw <= bundle.log_std_max)
    grads, _ = backward(policy, cache, np.concatenate([dl_du, dl_dlog_std * inside], axis=1))
    return loss, grads


def policy_update(batch: Batch, bundle: NetworkBundle, rng: np.random.Generator) -> float:
    zeta = rng.standard_normal((len(batch), bundle.policy.layer_sizes[-1] // 2))
    loss, grads = policy_objective(bundle.policy, bundle, batch.states, zeta, rng)
    if not math.isfinite(loss):
        raise TrainingError("policy: non-finite loss")
    optimizer_step(bundle.policy, grads, bundle.policy_opt, "policy")
    return loss


def soft_update(target: DenseNet, source: DenseNet, tau: float) -> DenseNet:
    for pt, ps in zip(target.parameters(), source.parameters()):
        pt *= 1.0 - tau
        pt += tau * ps
    return target
