"""Figure families over the simulator's delimited outputs.

Three kinds are supported:

- ``convergence``: per-policy episode return curves from ``episodes.csv``
  (seed mean with a min-max band);
- ``trajectory``: per-UAV polylines from ``trajectory_<seed>.csv``, with
  the static user/receiver layout overlaid when a ``layout_<seed>.csv``
  is supplied;
- ``sweep``: seed-averaged worst-user average age against the sweep axis
  from ``summary.csv``, one line per policy (covers both the user-count
  and the power-budget sweeps).

Rendering is read-only and deterministic: fixed style, no timestamps,
byte-identical output for identical inputs.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = ("convergence", "trajectory", "sweep")

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

POLICY_COLORS = {
    "ours": "tab:blue",
    "no-ris": "tab:orange",
    "random-traj": "tab:green",
    "matching": "tab:red",
    "random": "tab:gray",
}

AXIS_LABELS = {
    "num_users": "number of users",
    "max_power": "transmit power budget [dBm]",
}


class SchemaError(ValueError):
    """An input CSV is missing a required column or holds no rows."""


@dataclass
class FigureSpec:
    """One rendering job: figure kind, input CSVs, output image path."""

    kind: str
    inputs: list[Path]
    output: Path
    window: int = 10
    legend: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def read_rows(path: Path, required: tuple[str, ...]) -> list[dict]:
    """Load a CSV, failing fast on missing columns or empty input."""
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _label(spec: FigureSpec, policy: str) -> str:
    return spec.legend.get(policy, policy)


def _save(fig, out_path: Path) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, metadata={"Software": None, "CreationDate": None})
    plt.close(fig)


def _moving_average(values: list[float], window: int) -> list[float]:
    if len(values) < window:
        return values[:]
    return [
        sum(values[i - window + 1 : i + 1]) / window for i in range(window - 1, len(values))
    ]


def render_convergence(spec: FigureSpec) -> None:
    """Seed-aggregated moving-average return per policy."""
    # policy -> seed -> episode-ordered returns
    curves: dict[str, dict[str, list[tuple[int, float]]]] = defaultdict(lambda: defaultdict(list))
    for path in spec.inputs:
        for row in read_rows(path, ("policy", "seed", "episode", "episode_return")):
            curves[row["policy"]][row["seed"]].append(
                (int(row["episode"]), float(row["episode_return"]))
            )
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for policy in sorted(curves):
            per_seed = []
            for seed, pts in sorted(curves[policy].items()):
                pts.sort()
                per_seed.append(_moving_average([r for _, r in pts], spec.window))
            T = min(len(c) for c in per_seed)
            xs = list(range(T))
            mean = [sum(c[t] for c in per_seed) / len(per_seed) for t in range(T)]
            lo = [min(c[t] for c in per_seed) for t in range(T)]
            hi = [max(c[t] for c in per_seed) for t in range(T)]
            color = POLICY_COLORS.get(policy)
            ax.plot(xs, mean, label=_label(spec, policy), color=color)
            if len(per_seed) > 1:
                ax.fill_between(xs, lo, hi, alpha=0.15, color=color)
        ax.set_xlabel("episode")
        ax.set_ylabel(f"episode return ({spec.window}-episode mean)")
        ax.legend()
        _save(fig, spec.output)


def render_trajectory(spec: FigureSpec) -> None:
    """Per-UAV polylines; a layout CSV adds users and the receiver."""
    traj_rows: list[dict] = []
    layout_rows: list[dict] = []
    for path in spec.inputs:
        with open(path, newline="") as fh:
            header = (csv.reader(fh).__next__() or []) if path.exists() else []
        if "kind" in header:
            layout_rows.extend(read_rows(path, ("kind", "index", "x", "y")))
        else:
            traj_rows.extend(read_rows(path, ("slot", "uav", "x", "y")))
    if not traj_rows:
        raise SchemaError("no trajectory input among the given CSVs")

    by_uav: dict[int, list[tuple[int, float, float]]] = defaultdict(list)
    for row in traj_rows:
        by_uav[int(row["uav"])].append((int(row["slot"]), float(row["x"]), float(row["y"])))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for uav in sorted(by_uav):
            pts = sorted(by_uav[uav])
            xs = [x for _, x, _ in pts]
            ys = [y for _, _, y in pts]
            ax.plot(xs, ys, marker=".", markersize=2, linewidth=1, label=f"uav {uav}")
            ax.plot(xs[0], ys[0], marker="^", color="black", markersize=6)
        users = [(float(r["x"]), float(r["y"])) for r in layout_rows if r["kind"] == "user"]
        if users:
            ax.scatter([x for x, _ in users], [y for _, y in users],
                       marker="o", color="tab:purple", s=25, label="users")
        for r in layout_rows:
            if r["kind"] == "cu":
                ax.plot(float(r["x"]), float(r["y"]), marker="*", color="tab:red",
                        markersize=12, linestyle="none", label="receiver")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal")
        ax.legend(fontsize=7)
        _save(fig, spec.output)


def render_sweep(spec: FigureSpec) -> None:
    """Seed-averaged worst-user average age vs. the sweep axis."""
    by_policy: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    axis_name = "axis value"
    for path in spec.inputs:
        for row in read_rows(path, ("policy", "axis", "axis_value", "seed", "aaoi", "status")):
            if row["status"] != "ok" or row["axis_value"] in ("", None):
                continue
            axis_name = AXIS_LABELS.get(row["axis"], row["axis"])
            by_policy[row["policy"]][float(row["axis_value"])].append(float(row["aaoi"]))
    if not by_policy:
        raise SchemaError("no usable sweep rows (all failed or axis-less)")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for policy in sorted(by_policy):
            pts = sorted(by_policy[policy].items())
            xs = [x for x, _ in pts]
            means = [sum(v) / len(v) for _, v in pts]
            lo = [min(v) for _, v in pts]
            hi = [max(v) for _, v in pts]
            color = POLICY_COLORS.get(policy)
            ax.plot(xs, means, marker="o", label=_label(spec, policy), color=color)
            ax.fill_between(xs, lo, hi, alpha=0.15, color=color)
        ax.set_xlabel(axis_name)
        ax.set_ylabel("worst-user average age [s]")
        ax.legend()
        _save(fig, spec.output)


_RENDERERS = {
    "convergence": render_convergence,
    "trajectory": render_trajectory,
    "sweep": render_sweep,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return spec.output
