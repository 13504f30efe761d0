from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any
import zipfile

import numpy as np

from .config import CHECKPOINT_DIR_NAME, CHECKPOINT_FORMAT_VERSION, RNG_STREAMS
from .errors import CheckpointError
from .neural import DenseNet, OptimState
from .sac import NetworkBundle

logger = logging.getLogger(__name__)

HEADER_KEY = "header"
REQUIRED_HEADER_FIELDS = ("format_version", "networks", "optimizers", "alpha", "gamma", "tau", "seed", "step")
LATEST_NAME = "latest.json"


def checkpoint_path(out_dir: Path, step: int) -> Path:
    path = Path(out_dir) / CHECKPOINT_DIR_NAME
    path.mkdir(parents=True, exist_ok=True)
    return path / f"step_{step:09d}.npz"


def _network_header(net: DenseNet) -> dict[str, Any]:
    return {"layer_sizes": list(net.layer_sizes), "activation": net.activation, "dropout": net.dropout}


def _optimizer_header(opt: OptimState) -> dict[str, Any]:
    return {"step": opt.step, "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}


def save_checkpoint(path: Path, bundle: NetworkBundle, extra: dict[str, Any] | None = None) -> Path:
    """Parameters as little-endian float32 plus a JSON header; `extra` must carry seed and step."""
    header: dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "networks": {name: _network_header(getattr(bundle, name)) for name in NetworkBundle.NETWORKS},
        "optimizers": {name: _optimizer_header(getattr(bundle, name)) for name in NetworkBundle.OPTIMIZERS},
        "alpha": bundle.alpha,
        "gamma": bundle.gamma,
        "tau": bundle.tau,
        "log_std_bounds": [bundle.log_std_min, bundle.log_std_max],
    }
    header.update(extra or {})

    arrays: dict[str, np.ndarray] = {}
    for name in NetworkBundle.NETWORKS:
        net: DenseNet = getattr(bundle, name)
        for pname, p in zip(net.parameter_names(), net.parameters()):
            arrays[f"{name}/{pname}"] = p.astype("<f4")
    for name in NetworkBundle.OPTIMIZERS:
        opt: OptimState = getattr(bundle, name)
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"{name}/m{i}"] = m.astype("<f4")
            arrays[f"{name}/v{i}"] = v.astype("<f4")
    arrays[HEADER_KEY] = np.array(json.dumps(header, sort_keys=True))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    logger.info("checkpoint written: %s", path)
    return path


def _require(mapping: dict[str, Any], key: str, prefix: str = "") -> Any:
    if not isinstance(mapping, dict) or key not in mapping:
        raise CheckpointError("missing header field", field=f"{prefix}{key}")
    return mapping[key]


def read_header(path: Path) -> dict[str, Any]:
    with _open(path) as data:
        return _parse_header(data)


def _open(path: Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc


def _parse_header(data: Any) -> dict[str, Any]:
    if HEADER_KEY not in data.files:
        raise CheckpointError("checkpoint has no header", field=HEADER_KEY)
    try:
        header = json.loads(str(data[HEADER_KEY]))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"header is not valid JSON ({exc})", field=HEADER_KEY) from exc
    if not isinstance(header, dict):
        raise CheckpointError("header must be a JSON object", field=HEADER_KEY)
    for key in REQUIRED_HEADER_FIELDS:
        _require(header, key)
    if header["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {header['format_version']!r}", field="format_version")
    return header


def _load_array(data: Any, key: str, shape: tuple[int, ...], header_field: str) -> np.ndarray:
    if key not in data.files:
        raise CheckpointError(f"missing array '{key}'", field=header_field)
    arr = np.asarray(data[key], dtype=np.float64)
    if arr.shape != shape:
        raise CheckpointError(f"array '{key}' has shape {arr.shape}, expected {shape}", field=header_field)
    return arr.copy()


def _load_network(data: Any, name: str, spec: dict[str, Any]) -> DenseNet:
    prefix = f"networks.{name}."
    sizes = tuple(int(n) for n in _require(spec, "layer_sizes", prefix))
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        weights.append(_load_array(data, f"{name}/W{i}", (fan_in, fan_out), f"{prefix}layer_sizes"))
        biases.append(_load_array(data, f"{name}/b{i}", (fan_out,), f"{prefix}layer_sizes"))
    return DenseNet(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        activation=str(_require(spec, "activation", prefix)),
        dropout=float(_require(spec, "dropout", prefix)),
    )


def _load_optimizer(data: Any, name: str, spec: dict[str, Any], net: DenseNet) -> OptimState:
    prefix = f"optimizers.{name}."
    m, v = [], []
    for i, p in enumerate(net.parameters()):
        m.append(_load_array(data, f"{name}/m{i}", p.shape, f"{prefix}step"))
        v.append(_load_array(data, f"{name}/v{i}", p.shape, f"{prefix}step"))
    return OptimState(
        m=m,
        v=v,
        step=int(_require(spec, "step", prefix)),
        lr=float(_require(spec, "lr", prefix)),
        beta1=float(_require(spec, "beta1", prefix)),
        beta2=float(_require(spec, "beta2", prefix)),
        eps=float(_require(spec, "eps", prefix)),
    )


def load_checkpoint(path: Path) -> tuple[NetworkBundle, dict[str, Any]]:
    data = _open(path)
    with data:
        header = _parse_header(data)
        net_specs = header["networks"]
        nets = {
            name: _load_network(data, name, _require(net_specs, name, "networks."))
            for name in NetworkBundle.NETWORKS
        }
        opt_specs = header["optimizers"]
        opts = {
            opt_name: _load_optimizer(data, opt_name, _require(opt_specs, opt_name, "optimizers."), nets[net_name])
            for opt_name, net_name in NetworkBundle.OPTIMIZERS.items()
        }
    lo, hi = header.get("log_std_bounds", [None, None])
    bundle = NetworkBundle(
        **nets,
        **opts,
        alpha=float(header["alpha"]),
        gamma=float(header["gamma"]),
        tau=float(header["tau"]),
        **({} if lo is None else {"log_std_min": float(lo), "log_std_max": float(hi)}),
    )
    return bundle, header


def rng_states(header: dict[str, Any]) -> dict[str, Any]:
    states = _require(header, "rng_states")
    for name in RNG_STREAMS:
        _require(states, name, "rng_states.")
    return states


def save_latest(out_dir: Path, updates: dict[str, Any]) -> None:
    path = Path(out_dir) / CHECKPOINT_DIR_NAME / LATEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = load_latest(out_dir)
    meta.update(updates)
    path.write_text(json.dumps(meta, ensure_ascii=False, indent=2), encoding="utf-8")


def load_latest(out_dir: Path) -> dict[str, Any]:
    path = Path(out_dir) / CHECKPOINT_DIR_NAME / LATEST_NAME
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def resolve_checkpoint(source: Path) -> Path:
    """A checkpoint file, or a run directory whose latest pointer names one."""
    source = Path(source)
    if source.is_dir():
        latest = load_latest(source).get("checkpoint")
        if not latest:
            raise CheckpointError(f"no checkpoint recorded under {source}")
        return source / CHECKPOINT_DIR_NAME / latest
    return source


def run_dir_of(checkpoint: Path) -> Path:
    checkpoint = Path(checkpoint)
    if checkpoint.parent.name == CHECKPOINT_DIR_NAME:
        return checkpoint.parent.parent
    return checkpoint.parent
