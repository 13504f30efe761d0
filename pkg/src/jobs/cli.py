from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
import sys
import time

import numpy as np

from src.checkpoint_store import resolve_checkpoint, run_dir_of
from src.config import (
    DEFAULT_SEED,
    DEFAULT_TASK_SUITE,
    EVAL_DIR_NAME,
    EQUIVARIANCE_FACTORS,
    EQUIVARIANCE_RAYS,
    EQUIVARIANCE_TOLERANCE,
    GRADCHECK_SAMPLES,
    GRADCHECK_TOLERANCE,
    HIDDEN_SIZES,
    LIDAR_BEAMS,
    LIDAR_FOV,
    LIDAR_MAX_RANGE,
    SCENARIO_FILES,
    STATE_DIM,
)
from src.errors import (
    CheckpointError,
    ConfigError,
    NavigationError,
    ScenarioParseError,
    ScenarioValidationError,
    ShapeError,
    WorldDomainError,
)
from src.evalkit import run_eval
from src.models import Scenario, Vec2
from src.neural import DenseNet, LossProbe, gradient_check_report, output_probe
from src.run_config import load_run_config, make_streams
from src.sac import SacConfig, build_bundle, policy_objective
from src.training import train
from src.world import cast_rays, lidar_scan, load_scenario, scale_scenario

logger = logging.getLogger("src.jobs.cli")

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
VALIDATION_ERRORS = (
    ConfigError,
    ScenarioParseError,
    ScenarioValidationError,
    CheckpointError,
    ShapeError,
    WorldDomainError,
    FileNotFoundError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}")


def _scenario_path(raw: str) -> Path:
    """Bundled scenario name (env1..) or a path to a scenario file."""
    return SCENARIO_FILES.get(raw, Path(raw))


# gradcheck


def _random_inputs(rng: np.random.Generator, n: int, width: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, width))


def _corrupted(probe: LossProbe) -> LossProbe:
    def wrapped(net: DenseNet) -> tuple[float, list[np.ndarray]]:
        loss, grads = probe(net)
        return loss, [-g for g in grads]

    return wrapped


def run_gradcheck(
    seed: int = DEFAULT_SEED,
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES,
    n_samples: int = GRADCHECK_SAMPLES,
    corrupt: bool = False,
    batch: int = 8,
) -> dict[str, float]:
    """Worst relative error per network shape, plus the reparameterized policy loss."""
    rng = make_streams(seed)["init"]
    bundle = build_bundle(SacConfig(hidden_sizes=tuple(hidden_sizes)), rng)
    states = _random_inputs(rng, batch, STATE_DIM)

    probes: dict[str, tuple[DenseNet, LossProbe]] = {}
    for name, net in (("policy", bundle.policy), ("value", bundle.value), ("q", bundle.q1)):
        x = _random_inputs(rng, batch, net.layer_sizes[0])
        projection = rng.standard_normal((batch, net.layer_sizes[-1]))
        probes[name] = (net, output_probe(x, projection))

    zeta = rng.standard_normal((batch, bundle.policy.layer_sizes[-1] // 2))
    probes["policy_loss"] = (bundle.policy, lambda net: policy_objective(net, bundle, states, zeta))

    results: dict[str, float] = {}
    for name, (net, probe) in probes.items():
        report = gradient_check_report(net, _corrupted(probe) if corrupt else probe, rng, n_samples)
        results[name] = report.max_error
        logger.info("gradcheck %s: worst relative error %.3e at %s", name, report.max_error, report.worst)
    return results


# geom-bench


def _random_rays(s: Scenario, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    b = s.bounds
    margin = 1e-3 * min(b.width, b.height)
    origins = np.column_stack(
        [rng.uniform(b.xmin + margin, b.xmax - margin, n), rng.uniform(b.ymin + margin, b.ymax - margin, n)]
    )
    return origins, rng.uniform(-np.pi, np.pi, n)


def equivariance_error(s: Scenario, rng: np.random.Generator, n_rays: int = EQUIVARIANCE_RAYS) -> float:
    """Worst relative gap between rho * d(S) and d(rho * S) over random rays."""
    origins, angles = _random_rays(s, rng, n_rays)
    base = cast_rays(s, origins, angles, LIDAR_MAX_RANGE)
    worst = 0.0
    for rho in EQUIVARIANCE_FACTORS:
        scaled = cast_rays(scale_scenario(s, rho), rho * origins, angles, rho * LIDAR_MAX_RANGE)
        gap = np.abs(scaled - rho * base) / np.maximum(rho * base, 1e-12)
        worst = max(worst, float(gap.max()))
    return worst


def run_geom_bench(s: Scenario, n_rays: int, seed: int = DEFAULT_SEED) -> dict[str, float]:
    if n_rays <= 0:
        raise UsageError("n_rays must be positive")
    rng = make_streams(seed)["world"]
    error = equivariance_error(s, rng)
    if error > EQUIVARIANCE_TOLERANCE:
        raise NavigationError(f"scale equivariance violated: relative error {error:.3e}")

    origins, angles = _random_rays(s, rng, n_rays)
    started = time.perf_counter()
    cast_rays(s, origins, angles, LIDAR_MAX_RANGE)
    ray_seconds = time.perf_counter() - started

    n_scans = max(1, n_rays // LIDAR_BEAMS)
    started = time.perf_counter()
    for origin, heading in zip(origins[:n_scans], angles[:n_scans]):
        pose = (Vec2(float(origin[0]), float(origin[1])), float(heading))
        lidar_scan(s, pose, LIDAR_FOV, LIDAR_BEAMS, LIDAR_MAX_RANGE)
    scan_seconds = time.perf_counter() - started
    return {
        "equivariance_error": error,
        "rays": n_rays,
        "rays_per_second": n_rays / max(ray_seconds, 1e-12),
        "scans": n_scans,
        "scans_per_second": n_scans / max(scan_seconds, 1e-12),
    }


# subcommands


def cmd_train(args: argparse.Namespace) -> int:
    if args.config is None and args.scenario is None:
        raise UsageError("train needs --config or --scenario")
    overrides = {
        "seed": args.seed,
        "scenario": _scenario_path(args.scenario) if args.scenario else None,
        "tasks": args.tasks,
        "reward": args.reward,
        "augment_p": args.augment_p,
        "augment_m": args.augment_m,
        "total_steps": args.steps,
        "eval_interval": args.eval_interval,
        "resume": args.resume,
        "out": args.out,
    }
    config = load_run_config(Path(args.config) if args.config else None, overrides)
    result = train(config)
    payload = {
        "out": str(result.out_dir),
        "env_steps": result.env_steps,
        "episodes": result.episodes,
        "critic_updates": result.critic_updates,
        "policy_updates": result.policy_updates,
        "checkpoint": str(result.checkpoints[-1]) if result.checkpoints else None,
        "final_mean_score": result.final_report.mean_score if result.final_report is not None else None,
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = resolve_checkpoint(Path(args.checkpoint))
    out = Path(args.out) if args.out else run_dir_of(checkpoint) / EVAL_DIR_NAME
    report = run_eval(checkpoint, Path(args.tasks), out)
    for row in report.table.itertuples(index=False):
        print(f"{row.task:<24} {row.group:<8} {row.outcome:<10} steps={row.steps:<4d} score={row.score:+.4f}")
    print(f"{'mean':<24} score={report.mean_score:+.4f}")
    print(f"report written to {out}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    hidden = tuple(args.hidden) if args.hidden else HIDDEN_SIZES
    results = run_gradcheck(args.seed, hidden, args.samples, corrupt=args.corrupt)
    worst = max(results.values())
    print(json.dumps({"worst": worst, "networks": results, "tolerance": GRADCHECK_TOLERANCE}, indent=2))
    if worst >= GRADCHECK_TOLERANCE:
        logger.error("gradient check failed: worst relative error %.3e", worst)
        return EXIT_RUNTIME
    return 0


def cmd_geom_bench(args: argparse.Namespace) -> int:
    if args.rays <= 0:
        raise UsageError("--rays must be positive")
    scenario = load_scenario(_scenario_path(args.scenario))
    result = run_geom_bench(scenario, args.rays, args.seed)
    print(f"equivariance: max relative error {result['equivariance_error']:.3e} on {EQUIVARIANCE_RAYS} rays")
    print(f"raycast: {result['rays_per_second']:.0f} rays/s over {result['rays']} rays")
    print(f"lidar:   {result['scans_per_second']:.1f} scans/s over {result['scans']} scans")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Scenario-augmented delayed SAC for mapless navigation")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="Train a policy")
    p_train.add_argument("--config")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--scenario", help="Bundled scenario name or scenario file")
    p_train.add_argument("--tasks", help="Task suite used for periodic evaluation")
    p_train.add_argument("--reward", choices=["dense", "sparse"])
    p_train.add_argument("--augment-p", type=float)
    p_train.add_argument("--augment-m", type=float)
    p_train.add_argument("--steps", type=int)
    p_train.add_argument("--eval-interval", type=int)
    p_train.add_argument("--resume")
    p_train.add_argument("--out")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="Evaluate a checkpoint on a task suite")
    p_eval.add_argument("checkpoint", help="Checkpoint file or run directory")
    p_eval.add_argument("--tasks", default=str(DEFAULT_TASK_SUITE))
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="Finite-difference check of every network gradient")
    p_grad.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_grad.add_argument("--hidden", type=int, nargs="+")
    p_grad.add_argument("--samples", type=int, default=GRADCHECK_SAMPLES)
    p_grad.add_argument("--corrupt", action="store_true", help="Flip analytic gradient signs (self-test, must fail)")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_geom = sub.add_parser("geom-bench", help="Ray casting throughput with an equivariance check")
    p_geom.add_argument("--scenario", default="env1")
    p_geom.add_argument("--rays", type=int, default=1_000_000)
    p_geom.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_geom.set_defaults(func=cmd_geom_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        logger.error("%s", exc)
        return EXIT_USAGE
    except VALIDATION_ERRORS as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except (NavigationError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
