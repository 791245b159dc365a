"""Matplotlib figure rendering for the CLI's report path.

Figures are written next to the delimited outputs with fixed style and
no timestamps, so identical runs produce identical images.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "aerisim",
}

POLICY_COLORS = {
    "ours": "tab:blue",
    "no-ris": "tab:orange",
    "random-traj": "tab:green",
    "matching": "tab:red",
    "random": "tab:gray",
}


def _save(fig, out_path: Path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, metadata={"Software": None, "CreationDate": None})
    plt.close(fig)


def render_convergence(metrics: list[dict], out_path: Path, window: int = 10) -> None:
    """Episode return and its moving average over training."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        episodes = [m["episode"] for m in metrics]
        returns = [m["episode_return"] for m in metrics]
        ax.plot(episodes, returns, color="tab:blue", alpha=0.35, label="episode return")
        if len(returns) >= window:
            ma = [
                sum(returns[i - window + 1 : i + 1]) / window
                for i in range(window - 1, len(returns))
            ]
            ax.plot(episodes[window - 1 :], ma, color="tab:blue", label=f"{window}-episode mean")
        ax.set_xlabel("episode")
        ax.set_ylabel("return")
        ax.legend()
        _save(fig, out_path)


def render_trajectory(
    records: list[dict], user_positions, cu_position, out_path: Path
) -> None:
    """Per-UAV polylines with the user layout and the receiver marker."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        num_uavs = len(records[0]["positions"]) if records else 0
        for j in range(num_uavs):
            xs = [r["positions"][j][0] for r in records]
            ys = [r["positions"][j][1] for r in records]
            ax.plot(xs, ys, marker=".", markersize=2, linewidth=1, label=f"uav {j}")
            ax.plot(xs[0], ys[0], marker="^", color="black", markersize=6)
        ax.scatter(
            [p[0] for p in user_positions], [p[1] for p in user_positions],
            marker="o", color="tab:purple", s=25, label="users",
        )
        ax.plot(cu_position[0], cu_position[1], marker="*", color="tab:red",
                markersize=12, linestyle="none", label="receiver")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal")
        ax.legend(fontsize=7)
        _save(fig, out_path)


def render_sweep(records: list[dict], out_path: Path) -> None:
    """Seed-averaged AAoI against the sweep axis, one line per policy."""
    by_policy: dict[str, dict[float, list[float]]] = {}
    axis_name = "axis value"
    for r in records:
        if r.get("status") != "ok" or r.get("axis_value") is None:
            continue
        axis_name = r.get("axis", axis_name)
        by_policy.setdefault(r["policy"], {}).setdefault(float(r["axis_value"]), []).append(
            float(r["aaoi"])
        )
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for policy in sorted(by_policy):
            pts = sorted(by_policy[policy].items())
            xs = [x for x, _ in pts]
            means = [sum(v) / len(v) for _, v in pts]
            lo = [min(v) for _, v in pts]
            hi = [max(v) for _, v in pts]
            color = POLICY_COLORS.get(policy)
            ax.plot(xs, means, marker="o", label=policy, color=color)
            ax.fill_between(xs, lo, hi, alpha=0.15, color=color)
        ax.set_xlabel(axis_name)
        ax.set_ylabel("average AoI [s]")
        ax.legend()
        _save(fig, out_path)
