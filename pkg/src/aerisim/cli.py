"""Command-line entry points.

Subcommands: train, eval, sweep, oracle, resolve-config. Errors exit
nonzero with a single JSON object on stderr.
"""

from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

import click

from .config import ConfigError, load_config, write_resolved
from .oracles import run_all
from .sweep import run_sweep, write_episodes, write_summary, write_trace_files, run_cell
from .train import POLICIES, Trainer, save_bundle


def _fail(code: str, message: str) -> None:
    click.echo(json.dumps({"error": code, "message": message}), err=True)
    sys.exit(1)


def _load(config, profile):
    try:
        return load_config(path=config, profile=profile)
    except (ConfigError, FileNotFoundError) as exc:
        _fail("config", str(exc))


@click.group()
def main():
    """Uplink IRS-UAV network simulator and learning harness."""


config_opt = click.option("--config", type=click.Path(), default=None, help="YAML/JSON config document")
profile_opt = click.option("--profile", type=click.Choice(["desk", "paper"]), default=None)
seed_opt = click.option("--seed", type=int, default=0)
out_opt = click.option("--out", type=click.Path(), default="runs")
policy_opt = click.option("--policy", type=click.Choice(list(POLICIES) + ["all"]), default="ours")


@main.command()
@config_opt
@profile_opt
@seed_opt
@out_opt
@policy_opt
def train(config, profile, seed, out, policy):
    """Train one policy on one seed; writes metrics, traces, and a checkpoint."""
    cfg, overrides = _load(config, profile)
    if policy == "all":
        _fail("policy", "train runs a single policy; use sweep for multiple")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, overrides, out_dir / "resolved_config.json")
    try:
        from dataclasses import asdict

        trainer = Trainer(copy.deepcopy(cfg), seed, policy)
        metrics = trainer.train()
        aaoi, mean_return, _ = trainer.evaluate()
        records = write_trace_files(trainer, out_dir, seed)
        save_bundle(trainer.bundle, cfg, out_dir / f"checkpoint_{policy}_{seed}.npz")
        from .report import render_convergence, render_trajectory

        render_convergence(
            [asdict(m) for m in metrics], out_dir / f"convergence_{policy}_{seed}.png"
        )
        render_trajectory(
            records, trainer.env.topo.user_positions, trainer.env.topo.cu_position,
            out_dir / f"trajectory_{policy}_{seed}.png",
        )
    except Exception as exc:
        _fail("train", str(exc))
    record = {
        "policy": policy, "seed": seed, "aaoi": aaoi, "mean_return": mean_return,
        "status": "ok", "axis": "none", "axis_value": None,
        "episodes": [asdict(m) for m in metrics],
    }
    write_summary([record], out_dir / "summary.csv")
    write_episodes([record], out_dir / "episodes.csv")
    click.echo(f"aaoi={aaoi:.6f} mean_return={mean_return:.6f}")


@main.command("eval")
@config_opt
@profile_opt
@seed_opt
@out_opt
@policy_opt
def eval_cmd(config, profile, seed, out, policy):
    """Evaluate a freshly trained policy and emit per-slot traces."""
    cfg, overrides = _load(config, profile)
    if policy == "all":
        _fail("policy", "eval runs a single policy")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, overrides, out_dir / "resolved_config.json")
    try:
        trainer = Trainer(cfg, seed, policy)
        trainer.train()
        aaoi, mean_return, _ = trainer.evaluate()
        records = write_trace_files(trainer, out_dir, seed)
        from .report import render_trajectory

        render_trajectory(
            records, trainer.env.topo.user_positions, trainer.env.topo.cu_position,
            out_dir / f"trajectory_{policy}_{seed}.png",
        )
    except Exception as exc:
        _fail("eval", str(exc))
    click.echo(f"aaoi={aaoi:.6f} mean_return={mean_return:.6f}")


@main.command()
@config_opt
@profile_opt
@out_opt
@policy_opt
@click.option("--axis", type=click.Choice(["none", "num_users", "max_power"]), default=None)
@click.option("--values", type=str, default=None, help="comma-separated axis values")
@click.option("--seeds", type=str, default=None, help="comma-separated seed list")
@click.option("--no-cache", is_flag=True, default=False)
def sweep(config, profile, out, policy, axis, values, seeds, no_cache):
    """Run the (axis value x seed x policy) grid and write summary CSVs."""
    cfg, overrides = _load(config, profile)
    cfg.run.policy = policy
    if axis:
        cfg.run.sweep_axis = axis
    if values:
        cfg.run.sweep_values = tuple(float(v) for v in values.split(","))
    if seeds:
        cfg.run.seeds = tuple(int(s) for s in seeds.split(","))
    try:
        records = run_sweep(
            cfg, overrides, out_dir=out, reuse_cache=not no_cache,
            progress=lambda msg: click.echo(msg, err=True),
        )
    except Exception as exc:
        _fail("sweep", str(exc))
    failed = [r for r in records if r["status"] != "ok"]
    click.echo(f"{len(records)} cells, {len(failed)} failed")
    if failed:
        sys.exit(2)


@main.command()
@seed_opt
def oracle(seed):
    """Run the brute-force verification oracles."""
    results = run_all(seed=seed)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"[{status}] {r.name}: {r.detail}")
        ok = ok and r.passed
    if not ok:
        _fail("oracle", "one or more oracles failed")


@main.command("resolve-config")
@config_opt
@profile_opt
@click.option("--out", type=click.Path(), default=None, help="write JSON here instead of stdout")
def resolve_config(config, profile, out):
    """Emit the fully resolved configuration with provenance tags."""
    cfg, overrides = _load(config, profile)
    if out:
        write_resolved(cfg, overrides, out)
    else:
        from .config import resolve

        click.echo(json.dumps(resolve(cfg, overrides), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
