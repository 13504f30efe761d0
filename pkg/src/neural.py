from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import (
    ADAM_BETAS,
    ADAM_EPS,
    GRADCHECK_ABS_FLOOR,
    GRADCHECK_SAMPLES,
    GRADCHECK_STEP,
    HIDDEN_ACTIVATION,
    LEARNING_RATE,
)
from .errors import ShapeError, TrainingError


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _relu_grad(z: np.ndarray) -> np.ndarray:
    return (z > 0.0).astype(z.dtype)


def _tanh_grad(z: np.ndarray) -> np.ndarray:
    return 1.0 - np.tanh(z) ** 2


ACTIVATIONS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]] = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


@dataclass
class DenseNet:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = HIDDEN_ACTIVATION
    dropout: float = 0.0

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def parameter_names(self) -> list[str]:
        names: list[str] = []
        for i in range(len(self.weights)):
            names.extend([f"W{i}", f"b{i}"])
        return names

    def copy(self) -> DenseNet:
        return DenseNet(
            layer_sizes=tuple(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            dropout=self.dropout,
        )


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    masks: list[np.ndarray | None]
    squeeze: bool


def init_dense_net(
    layer_sizes: tuple[int, ...] | list[int],
    rng: np.random.Generator,
    activation: str = HIDDEN_ACTIVATION,
    dropout: float = 0.0,
) -> DenseNet:
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"invalid layer sizes {sizes}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation '{activation}'")
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return DenseNet(layer_sizes=sizes, weights=weights, biases=biases, activation=activation, dropout=dropout)


def forward(net: DenseNet, x: np.ndarray, rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Dropout is only applied when an rng is supplied (training passes)."""
    a = np.asarray(x, dtype=float)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != net.layer_sizes[0]:
        raise ShapeError(f"input shape {np.shape(x)} does not match layer 0 of size {net.layer_sizes[0]}")

    act, _ = ACTIVATIONS[net.activation]
    cache = ForwardCache(inputs=[], pre=[], masks=[], squeeze=squeeze)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.inputs.append(a)
        z = a @ w + b
        cache.pre.append(z)
        if i == last:
            a = z
            break
        a = act(z)
        mask = None
        if net.dropout > 0.0 and rng is not None:
            mask = (rng.random(a.shape) >= net.dropout) / (1.0 - net.dropout)
            a = a * mask
        cache.masks.append(mask)
    return (a[0] if squeeze else a), cache


def backward(net: DenseNet, cache: ForwardCache, output_gradient: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns gradients aligned with `net.parameters()` and the input gradient."""
    g = np.asarray(output_gradient, dtype=float)
    if cache.squeeze and g.ndim == 1:
        g = g[None, :]
    expected = cache.pre[-1].shape
    if g.shape != expected:
        raise ShapeError(f"output gradient shape {g.shape} does not match forward output {expected}")

    _, act_grad = ACTIVATIONS[net.activation]
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = cache.inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            mask = cache.masks[i - 1]
            if mask is not None:
                g = g * mask
            g = g * act_grad(cache.pre[i - 1])
    return grads, (g[0] if cache.squeeze else g)


@dataclass
class OptimState:
    """Adam moments aligned with a network's parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = LEARNING_RATE
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    eps: float = ADAM_EPS


def init_optim(net: DenseNet, lr: float = LEARNING_RATE) -> OptimState:
    params = net.parameters()
    return OptimState(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], lr=lr)


def optimizer_step(net: DenseNet, grads: list[np.ndarray], opt: OptimState, label: str = "network") -> OptimState:
    params = net.parameters()
    if len(grads) != len(params):
        raise ShapeError(f"{label}: got {len(grads)} gradients for {len(params)} parameters")
    names = net.parameter_names()
    for name, p, g in zip(names, params, grads):
        if g.shape != p.shape:
            raise ShapeError(f"{label}.{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"{label}.{name}: non-finite gradient at optimizer step {opt.step + 1}")

    opt.step += 1
    c1 = 1.0 - opt.beta1**opt.step
    c2 = 1.0 - opt.beta2**opt.step
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return opt


LossProbe = Callable[[DenseNet], tuple[float, list[np.ndarray]]]


def output_probe(x: np.ndarray, projection: np.ndarray) -> LossProbe:
    """Scalar probe loss = sum(forward(x) * projection)."""

    def probe(net: DenseNet) -> tuple[float, list[np.ndarray]]:
        out, cache = forward(net, x)
        grads, _ = backward(net, cache, projection)
        return float(np.sum(out * projection)), grads

    return probe


def relative_error(analytic: float, numeric: float, floor: float = GRADCHECK_ABS_FLOOR) -> float:
    diff = abs(analytic - numeric)
    scale = max(abs(analytic), abs(numeric))
    return diff if scale < floor else diff / scale


@dataclass
class GradCheckReport:
    max_error: float
    checked: int
    worst: tuple[str, int] | None = None
    errors: list[float] = field(default_factory=list)


def gradient_check_report(
    net: DenseNet,
    loss_probe: LossProbe,
    rng: np.random.Generator,
    n_samples: int = GRADCHECK_SAMPLES,
    h: float = GRADCHECK_STEP,
) -> GradCheckReport:
    params = net.parameters()
    names = net.parameter_names()
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])

    _, analytic = loss_probe(net)
    picks = rng.choice(total, size=min(n_samples, total), replace=False)

    report = GradCheckReport(max_error=0.0, checked=len(picks))
    for flat in sorted(int(k) for k in picks):
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = flat - int(offsets[which])
        view = params[which].reshape(-1)
        original = view[local]
        view[local] = original + h
        plus, _ = loss_probe(net)
        view[local] = original - h
        minus, _ = loss_probe(net)
        view[local] = original
        numeric = (plus - minus) / (2.0 * h)
        err = relative_error(float(analytic[which].reshape(-1)[local]), numeric)
        report.errors.append(err)
        if err > report.max_error or report.worst is None:
            report.max_error = max(report.max_error, err)
            report.worst = (names[which], local)
    return report


def gradient_check(
    net: DenseNet,
    loss_probe: LossProbe,
    rng: np.random.Generator,
    n_samples: int = GRADCHECK_SAMPLES,
) -> float:
    return gradient_check_report(net, loss_probe, rng, n_samples).max_error
