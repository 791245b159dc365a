"""Comparison policies: reflector-free, random trajectory, and matching.

The reflector-free and random-trajectory schemes reuse the full learner
with one decision source replaced. The matching scheme assigns
sub-carriers by capacity-constrained deferred acceptance between
backlogged users and sub-carriers, with uniform powers.
"""

from __future__ import annotations

import numpy as np

NO_RIS_BETA = 1e-9


class RandomWaypointWalker:
    """Random-waypoint mobility for the random-trajectory baseline.

    Each UAV flies at full speed toward a destination drawn uniformly
    over the deployment square and draws a fresh destination on arrival.
    Unlike per-slot white displacement noise (which diffuses only a few
    meters per episode), this is the standard roaming mobility baseline:
    the fleet actually covers the arena instead of hovering at its spawn
    point.
    """

    def __init__(self, num_uavs: int, max_step: float, half_extent: float):
        self.J = int(num_uavs)
        self.step = float(max_step)
        self.half = float(half_extent)
        self.targets: np.ndarray | None = None

    def reset(self) -> None:
        """Forget destinations; fresh ones are drawn on the next delta."""
        self.targets = None

    def delta(self, xy: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """(J, 2) full-speed displacements toward the current waypoints."""
        if self.targets is None:
            self.targets = rng.uniform(-self.half, self.half, size=(self.J, 2))
        out = np.zeros((self.J, 2))
        for j in range(self.J):
            to = self.targets[j] - xy[j]
            dist = float(np.linalg.norm(to))
            if dist <= self.step:
                out[j] = to
                self.targets[j] = rng.uniform(-self.half, self.half, size=2)
            else:
                out[j] = to / dist * self.step
        return out


def deferred_acceptance(
    user_prefs: dict[int, list[int]],
    side_prefs: dict[int, list[int]],
    capacity: int,
) -> dict[int, list[int]]:
    """Many-to-one deferred acceptance; users propose.

    ``user_prefs[u]`` ranks sub-carriers best-first; ``side_prefs[n]``
    ranks users best-first. Returns {sub-carrier: matched users}.
    """
    matched: dict[int, list[int]] = {n: [] for n in side_prefs}
    rank = {n: {u: i for i, u in enumerate(prefs)} for n, prefs in side_prefs.items()}
    next_choice = {u: 0 for u in user_prefs}
    free = [u for u in user_prefs if user_prefs[u]]
    while free:
        u = free.pop(0)
        if next_choice[u] >= len(user_prefs[u]):
            continue
        n = user_prefs[u][next_choice[u]]
        next_choice[u] += 1
        matched[n].append(u)
        matched[n].sort(key=lambda v: rank[n][v])
        if len(matched[n]) > capacity:
            free.append(matched[n].pop())
    return matched


def gain_tiers(backlog: np.ndarray, gains: np.ndarray, num_tiers: int) -> list[list[int]]:
    """Split backlogged users into gain tiers, strongest tier first.

    Tier t holds the t-th slice of the backlogged users ordered by mean
    channel gain (descending, ties toward the lower index). Matching one
    user per tier onto each sub-carrier yields the standard power-domain
    pairing of dissimilar channel strengths; co-scheduling two near-equal
    gains leaves the stronger user interference-limited below the
    delivery threshold no matter the power split.
    """
    users = [int(u) for u in np.nonzero(backlog > 0)[0]]
    mean_gain = gains.mean(axis=1)
    users.sort(key=lambda u: (-mean_gain[u], u))
    size = -(-len(users) // num_tiers) if users else 0
    return [users[t * size : (t + 1) * size] for t in range(num_tiers)]


def matching_assignment(
    ages: np.ndarray, backlog: np.ndarray, gains: np.ndarray, num_subcarriers: int, cluster_size: int
) -> np.ndarray:
    """(U, N) assignment via tiered deferred acceptance.

    Backlogged users are split into ``cluster_size`` gain tiers; each
    tier runs one-seat-per-sub-carrier deferred acceptance where users
    rank sub-carriers by current channel gain and each sub-carrier ranks
    users by age (oldest first, ties toward the lower index). Clusters
    therefore combine one user from each tier.
    """
    subcs = list(range(num_subcarriers))
    U = ages.shape[0]
    assignment = np.zeros((U, num_subcarriers), dtype=int)
    for tier in gain_tiers(backlog, gains, cluster_size):
        user_prefs = {
            u: sorted(subcs, key=lambda n: (-gains[u, n], n)) for u in tier
        }
        side_prefs = {
            n: sorted(tier, key=lambda u: (-ages[u], u)) for n in subcs
        }
        matched = deferred_acceptance(user_prefs, side_prefs, 1)
        for n, members in matched.items():
            for u in members:
                assignment[u, n] = 1
    return assignment


def is_stable(
    assignment: np.ndarray,
    ages: np.ndarray,
    backlog: np.ndarray,
    gains: np.ndarray,
    cluster_size: int,
) -> bool:
    """Exhaustive blocking-pair scan, tier by tier, for the matching above."""
    N = assignment.shape[1]
    for tier in gain_tiers(backlog, gains, cluster_size):
        tier_set = set(tier)
        for u in tier:
            assigned = np.nonzero(assignment[u])[0]
            current_gain = gains[u, assigned[0]] if assigned.size else -np.inf
            for n in range(N):
                if assignment[u, n]:
                    continue
                if gains[u, n] <= current_gain:
                    continue      # u does not prefer n
                holder = [v for v in np.nonzero(assignment[:, n])[0] if v in tier_set]
                if not holder:
                    return False  # free tier seat at a preferred sub-carrier
                # n prefers u over the seat's current holder?
                if (-ages[u], u) < (-ages[holder[0]], holder[0]):
                    return False
    return True
