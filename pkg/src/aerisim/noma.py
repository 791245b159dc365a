"""Sub-carrier assignment feasibility, SIC ordering, SINR, and rates.

Up to Q users share a sub-carrier. The receiver decodes them strongest
received power first, cancelling each decoded signal, so a user's
interference comes only from users decoded after it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, ReflectionConfig


@dataclass
class PowerLimits:
    """C4-C6 constants: cluster size, per-sub-carrier mask, per-user budget."""

    cluster_size: int            # Q
    power_mask: float            # watts, per sub-carrier
    power_max: float             # watts, per user over all sub-carriers

    def __post_init__(self):
        if self.cluster_size < 1:
            raise ValueError("cluster_size must be >= 1")
        if self.power_mask <= 0 or self.power_max <= 0:
            raise ValueError("power limits must be positive")


@dataclass
class LinkDecision:
    """One slot's resource allocation.

    assignment: (U, N) binary; powers: (U, N) watts; reflection config;
    uav_delta: (J, 2) requested displacements (consumed by mobility).
    """

    assignment: np.ndarray
    powers: np.ndarray
    reflection: ReflectionConfig
    uav_delta: np.ndarray

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment)
        self.powers = np.asarray(self.powers, dtype=float)
        self.uav_delta = np.asarray(self.uav_delta, dtype=float)
        if self.assignment.shape != self.powers.shape:
            raise ValueError("assignment and powers must share shape (U, N)")


@dataclass
class SicOrder:
    """Per-sub-carrier decoding order, strongest received power first.

    per_subcarrier[n] lists user indices in decoding order.
    """

    per_subcarrier: list[np.ndarray]

    def position(self, u: int, n: int) -> int:
        order = self.per_subcarrier[n]
        hits = np.nonzero(order == u)[0]
        if hits.size == 0:
            raise ValueError(f"user {u} not assigned on sub-carrier {n}")
        return int(hits[0])


def received_powers(channels: ChannelRealization, decision: LinkDecision) -> np.ndarray:
    """(U, N) received signal power |h_eff|^2 * p for assigned pairs, 0 otherwise."""
    gain = channels.effective_gain()
    return decision.assignment * decision.powers * gain


def build_sic_order(channels: ChannelRealization, decision: LinkDecision) -> SicOrder:
    """Sort each sub-carrier's assigned users by received power descending.

    Ties break toward the lower user index.
    """
    rx = received_powers(channels, decision)
    orders = []
    for n in range(decision.assignment.shape[1]):
        users = np.nonzero(decision.assignment[:, n])[0]
        # stable sort on negated power keeps lower index first on ties
        orders.append(users[np.argsort(-rx[users, n], kind="stable")])
    return SicOrder(per_subcarrier=orders)


def sinr(
    channels: ChannelRealization,
    decision: LinkDecision,
    order: SicOrder,
    u: int,
    n: int,
    noise_power: float,
    interference_from_earlier: bool = False,
) -> float:
    """Post-SIC SINR of user u on sub-carrier n.

    Interference comes from users decoded after u (already-decoded
    signals are cancelled). ``interference_from_earlier`` flips to the
    literal lower-order-index convention for ablation.
    """
    if decision.assignment[u, n] == 0:
        raise ValueError(f"user {u} is not assigned on sub-carrier {n}")
    rx = received_powers(channels, decision)
    pos = order.position(u, n)
    seq = order.per_subcarrier[n]
    others = seq[:pos] if interference_from_earlier else seq[pos + 1:]
    interference = float(np.sum(rx[others, n])) if others.size else 0.0
    return float(rx[u, n] / (interference + noise_power))


def user_rate(
    channels: ChannelRealization,
    decision: LinkDecision,
    order: SicOrder,
    u: int,
    bandwidth: float,
    noise_power: float,
    interference_from_earlier: bool = False,
) -> float:
    """Achieved rate of user u in bits/s: B * sum_n log2(1 + sinr)."""
    total = 0.0
    for n in np.nonzero(decision.assignment[u, :])[0]:
        g = sinr(channels, decision, order, u, int(n), noise_power, interference_from_earlier)
        total += np.log2(1.0 + g)
    return bandwidth * total


def all_rates(
    channels: ChannelRealization,
    decision: LinkDecision,
    bandwidth: float,
    noise_power: float,
    interference_from_earlier: bool = False,
) -> np.ndarray:
    """(U,) per-user rates in bits/s under the constructed SIC order."""
    order = build_sic_order(channels, decision)
    U = decision.assignment.shape[0]
    return np.array(
        [
            user_rate(channels, decision, order, u, bandwidth, noise_power, interference_from_earlier)
            for u in range(U)
        ]
    )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_decision(decision: LinkDecision, limits: PowerLimits, atol: float = 1e-9) -> ValidationReport:
    """Report every violated constraint among C4, C5, C6, C8, C9, C10.

    C7 (decoding-order consistency) holds by construction of SicOrder and
    is asserted separately in debug paths.
    """
    rep = ValidationReport()
    a, p = decision.assignment, decision.powers
    if not np.all((a == 0) | (a == 1)):
        rep.violations.append("C10: assignment entries must be binary")
    col = a.sum(axis=0)
    for n in np.nonzero(col > limits.cluster_size)[0]:
        rep.violations.append(f"C4: sub-carrier {n} carries {int(col[n])} > Q={limits.cluster_size} users")
    row = a.sum(axis=1)
    for u in np.nonzero(row > 1)[0]:
        rep.violations.append(f"C4: user {u} occupies {int(row[u])} sub-carriers (one cluster per slot)")
    over_mask = (a * p) > limits.power_mask + atol
    for u, n in zip(*np.nonzero(over_mask)):
        rep.violations.append(f"C5: power[{u},{n}]={p[u, n]:.4g} exceeds mask {limits.power_mask:.4g}")
    ghost = (a == 0) & (p != 0)
    for u, n in zip(*np.nonzero(ghost)):
        rep.violations.append(f"C5: power[{u},{n}] nonzero on unassigned pair")
    budget = (a * p).sum(axis=1)
    for u in np.nonzero(budget > limits.power_max + atol)[0]:
        rep.violations.append(f"C6: user {u} total power {budget[u]:.4g} exceeds {limits.power_max:.4g}")
    rep.violations.extend(decision.reflection.violations())
    return rep
