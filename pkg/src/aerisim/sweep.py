"""Experiment harness: cells, sweeps, and delimited outputs.

A cell is one (axis value, seed, policy) training-plus-evaluation run.
Cell results are cached as JSON keyed by the resolved-config hash, so a
re-run with identical inputs reproduces the summary bit-exactly without
recomputation. Failures are recorded and the sweep continues.
"""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, write_resolved
from .train import POLICIES, Trainer, config_hash

MAIN_POLICIES = ("ours", "no-ris", "random-traj", "matching")


def axis_configs(cfg: ExperimentConfig) -> list[tuple[float | None, ExperimentConfig]]:
    """Expand the sweep axis into per-cell configs."""
    axis = cfg.run.sweep_axis
    if axis == "none":
        return [(None, cfg)]
    values = cfg.run.sweep_values
    if not values:
        raise ValueError(f"sweep axis {axis!r} needs sweep_values")
    out = []
    for v in values:
        c = copy.deepcopy(cfg)
        if axis == "num_users":
            c.topology.num_users = int(v)
        elif axis == "max_power":
            c.noma.power_max_dbm = float(v)
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        out.append((v, c))
    return out


def run_cell(cfg: ExperimentConfig, seed: int, policy: str, out_dir: Path, reuse_cache: bool = True) -> dict:
    """Train and evaluate one cell; returns the cell record."""
    key = f"cell_{policy}_{seed}_{config_hash(cfg)}"
    cache = out_dir / f"{key}.json"
    if reuse_cache and cache.exists():
        return json.loads(cache.read_text())
    start = time.time()
    trainer = Trainer(copy.deepcopy(cfg), seed, policy)
    metrics = trainer.train()
    aaoi, mean_return, _ = trainer.evaluate()
    record = {
        "policy": policy,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "aaoi": aaoi,
        "mean_return": mean_return,
        "status": "ok",
        "wall_clock_s": time.time() - start,
        "episodes": [asdict(m) for m in metrics],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    cache.write_text(json.dumps(record))
    return record


def write_trace_files(trainer: Trainer, out_dir: Path, seed: int) -> list[dict]:
    """Per-slot trace and trajectory CSVs from one frozen-policy episode.

    Returns the per-slot records for downstream figure rendering.
    """
    _, _, traces = trainer.evaluate(episodes=1, record_traces=True)
    records = traces[0]
    U = trainer.env.U
    J = trainer.env.J
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"trace_{seed}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        header = (
            ["slot"]
            + [f"age_u{u}" for u in range(U)]
            + [f"rate_u{u}" for u in range(U)]
            + [x for j in range(J) for x in (f"uav{j}_x", f"uav{j}_y")]
            + ["reward", "feasible"]
        )
        w.writerow(header)
        for rec in records:
            row = (
                [rec["slot"]]
                + [f"{a:.6f}" for a in rec["ages"]]
                + [f"{r:.3f}" for r in rec["rates"]]
                + [f"{v:.3f}" for xy in rec["positions"] for v in xy]
                + [f"{rec['reward']:.6f}", int(rec["feasible"])]
            )
            w.writerow(row)
    with open(out_dir / f"trajectory_{seed}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "uav", "x", "y"])
        for rec in records:
            for j, (x, y) in enumerate(rec["positions"]):
                w.writerow([rec["slot"], j, f"{x:.3f}", f"{y:.3f}"])
    # static context for trajectory plots
    with open(out_dir / f"layout_{seed}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "x", "y"])
        for u, p in enumerate(trainer.env.topo.user_positions):
            w.writerow(["user", u, f"{p[0]:.3f}", f"{p[1]:.3f}"])
        cu = trainer.env.topo.cu_position
        w.writerow(["cu", 0, f"{cu[0]:.3f}", f"{cu[1]:.3f}"])
    return records


def run_sweep(
    cfg: ExperimentConfig,
    overrides: set[str] | None = None,
    out_dir: str | Path | None = None,
    reuse_cache: bool = True,
    progress=None,
) -> list[dict]:
    """Execute every (axis value, seed, policy) cell and emit CSVs.

    Returns the cell records. ``summary.csv`` is long-format; per-episode
    returns land in ``episodes.csv``.
    """
    out = Path(out_dir or cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, overrides or set(), out / "resolved_config.json")

    policies = MAIN_POLICIES if cfg.run.policy == "all" else (cfg.run.policy,)
    cells = []
    for value, cell_cfg in axis_configs(cfg):
        for policy in policies:
            for seed in cfg.run.seeds:
                cells.append((value, cell_cfg, policy, int(seed)))

    records = []
    for value, cell_cfg, policy, seed in cells:
        if progress:
            progress(f"cell policy={policy} seed={seed} axis={cfg.run.sweep_axis}={value}")
        try:
            rec = run_cell(cell_cfg, seed, policy, out, reuse_cache=reuse_cache)
        except Exception as exc:   # cell failures must not kill the sweep
            rec = {
                "policy": policy, "seed": seed, "aaoi": float("nan"),
                "mean_return": float("nan"), "status": f"failed: {exc}", "episodes": [],
            }
        rec = dict(rec)
        rec["axis"] = cfg.run.sweep_axis
        rec["axis_value"] = value
        records.append(rec)

    write_summary(records, out / "summary.csv")
    write_episodes(records, out / "episodes.csv")
    if any(r.get("axis_value") is not None for r in records):
        from .report import render_sweep

        render_sweep(records, out / "sweep_aaoi.png")
    return records


def write_summary(records: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "axis", "axis_value", "seed", "aaoi", "mean_return", "status"])
        for r in records:
            w.writerow(
                [
                    r["policy"], r.get("axis", "none"), r.get("axis_value"),
                    r["seed"], r["aaoi"], r["mean_return"], r["status"],
                ]
            )


def write_episodes(records: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["policy", "axis_value", "seed", "episode", "episode_return", "aaoi",
             "ddqn_loss", "policy_loss", "value_loss", "epsilon"]
        )
        for r in records:
            for m in r.get("episodes", []):
                w.writerow(
                    [
                        r["policy"], r.get("axis_value"), r["seed"], m["episode"],
                        m["episode_return"], m["aaoi"], m["ddqn_loss"],
                        m["policy_loss"], m["value_loss"], m["epsilon"],
                    ]
                )
