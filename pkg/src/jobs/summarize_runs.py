from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np
import pandas as pd

from src.config import EVAL_LOG_NAME, METRIC_LOG_NAME
from src.metrics import success_rates


def load_run(run_dir: Path) -> tuple[pd.DataFrame, pd.DataFrame]:
    metrics_path = run_dir / METRIC_LOG_NAME
    evals_path = run_dir / EVAL_LOG_NAME
    if not metrics_path.exists():
        raise SystemExit(f"No metric log under {run_dir}.")
    metrics = pd.read_csv(metrics_path)
    if not evals_path.exists():
        return metrics, pd.DataFrame(columns=["step", "task", "group", "outcome", "steps", "score"])
    return metrics, pd.read_csv(evals_path)


def learning_curve(evals: pd.DataFrame) -> pd.Series:
    """Mean task score per evaluation step."""
    if evals.empty:
        return pd.Series(dtype=float)
    return evals.groupby("step", sort=True)["score"].mean()


def summarize_run(name: str, metrics: pd.DataFrame, evals: pd.DataFrame) -> dict:
    curve = learning_curve(evals)
    final_step = int(curve.index[-1]) if not curve.empty else None
    final = evals[evals["step"] == final_step] if final_step is not None else evals.iloc[0:0]
    groups = success_rates(final)
    return {
        "run": name,
        "episodes": int(len(metrics)),
        "env_steps": int(metrics["step"].max()) if not metrics.empty else 0,
        "success_share": float(np.mean(metrics["terminal_kind"] == "goal")) if not metrics.empty else float("nan"),
        "final_step": final_step,
        "final_score": float(curve.iloc[-1]) if not curve.empty else float("nan"),
        "best_score": float(curve.max()) if not curve.empty else float("nan"),
        "group_success": {str(r["group"]): float(r["success_rate"]) for r in groups.to_dict(orient="records")},
    }


def aggregate_curves(curves: dict[str, pd.Series]) -> pd.DataFrame:
    """Mean and std across runs at the evaluation steps every run reached."""
    if not curves:
        return pd.DataFrame(columns=["step", "mean", "std", "runs"])
    table = pd.concat(curves, axis=1).dropna()
    return pd.DataFrame(
        {
            "step": table.index.astype(int),
            "mean": table.mean(axis=1).to_numpy(),
            "std": table.std(axis=1, ddof=0).to_numpy(),
            "runs": table.shape[1],
        }
    ).reset_index(drop=True)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Aggregate evaluation curves across training runs (seeds)")
    parser.add_argument("runs", nargs="+", help="Run directories written by the train command")
    parser.add_argument("--label", default="runs")
    parser.add_argument("--out-json", default="runs/summary.json")
    parser.add_argument("--out-csv", default="runs/summary_curve.csv")
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> None:
    args = parse_args(argv)
    per_run, curves = [], {}
    for raw in args.runs:
        run_dir = Path(raw)
        metrics, evals = load_run(run_dir)
        per_run.append(summarize_run(run_dir.name, metrics, evals))
        curve = learning_curve(evals)
        if not curve.empty:
            curves[run_dir.name] = curve

    table = aggregate_curves(curves)
    if table.empty:
        raise SystemExit("No evaluation rows found. Train with a task suite to record evaluations.")

    out_json = Path(args.out_json)
    out_csv = Path(args.out_csv)
    out_json.parent.mkdir(parents=True, exist_ok=True)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_csv, index=False)

    group_names = sorted({g for run in per_run for g in run["group_success"]})
    payload = {
        "label": args.label,
        "run_count": len(per_run),
        "final_score_mean": float(np.nanmean([r["final_score"] for r in per_run])),
        "final_score_std": float(np.nanstd([r["final_score"] for r in per_run])),
        "group_success_mean": {
            g: float(np.mean([r["group_success"][g] for r in per_run if g in r["group_success"]])) for g in group_names
        },
        "runs": per_run,
        "curve": table.to_dict(orient="records"),
    }
    out_json.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
    print(json.dumps(payload, ensure_ascii=False, indent=2))


if __name__ == "__main__":
    main()
