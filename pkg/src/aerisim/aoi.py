"""Traffic generation, per-user age evolution, objective, and reward.

Each user holds at most one pending status update, generated by a
Poisson arrival process; a fresher measurement supersedes an undelivered
stale one (only the newest sample can lower the destination's age). The
pending update is delivered within a slot when it fits at the achieved
rate (d / r <= slot duration); partial delivery is not modeled and an
undeliverable update waits for the next attempt. On delivery the age
resets to the age of the delivered generation; otherwise it grows by
one slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TrafficParams:
    """Poisson arrival model: expected packets per slot and bits per packet."""

    poisson_rate: float = 0.5
    packet_size: float = 10_000.0

    def __post_init__(self):
        if self.poisson_rate <= 0 or self.packet_size <= 0:
            raise ValueError("poisson_rate and packet_size must be positive")


@dataclass
class AoiState:
    """Per-user freshness bookkeeping.

    age: (U,) seconds; backlog: (U,) bits of the pending update;
    generation_slot: (U,) slot the pending update was generated
    (-1 when nothing is pending).
    """

    age: np.ndarray
    backlog: np.ndarray
    generation_slot: np.ndarray
    last_arrival: np.ndarray

    @classmethod
    def initial(cls, num_users: int, slot_duration: float) -> "AoiState":
        return cls(
            age=np.full(num_users, slot_duration),
            backlog=np.zeros(num_users),
            generation_slot=np.full(num_users, -1, dtype=int),
            last_arrival=np.zeros(num_users, dtype=int),
        )

    def copy(self) -> "AoiState":
        return AoiState(
            age=self.age.copy(),
            backlog=self.backlog.copy(),
            generation_slot=self.generation_slot.copy(),
            last_arrival=self.last_arrival.copy(),
        )


def generate_traffic(
    state: AoiState, params: TrafficParams, slot_index: int, rng: np.random.Generator
) -> AoiState:
    """Draw Poisson arrivals for ``slot_index``; fresh data replaces stale.

    A slot with arrivals installs that slot's measurement as the pending
    update (superseding an undelivered older one); a slot without
    arrivals leaves the pending update untouched.
    """
    out = state.copy()
    packets = rng.poisson(params.poisson_rate, size=state.backlog.shape)
    bits = packets * params.packet_size
    fresh = bits > 0
    out.generation_slot[fresh] = slot_index
    out.backlog[fresh] = bits[fresh]
    out.last_arrival = packets
    return out


def step_aoi(state: AoiState, rates: np.ndarray, slot_index: int, slot_duration: float) -> AoiState:
    """Advance ages for one slot given the achieved per-user rates.

    A user's pending update is delivered when it fits in the slot at the
    achieved rate; the age becomes (k - k') * delta + delta. Everyone
    else, including idle users, ages by delta.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    out = state.copy()
    for u in range(state.age.shape[0]):
        d, r = state.backlog[u], rates[u]
        if d > 0 and r > 0 and d / r <= slot_duration:
            out.age[u] = (slot_index - state.generation_slot[u]) * slot_duration + slot_duration
            out.backlog[u] = 0.0
            out.generation_slot[u] = -1
        else:
            out.age[u] = state.age[u] + slot_duration
    return out


def objective_aaoi(age_trace: np.ndarray) -> float:
    """Worst-user time-averaged age over a (K, U) trace, in seconds."""
    trace = np.asarray(age_trace, dtype=float)
    if trace.ndim != 2 or trace.shape[0] < 1:
        raise ValueError("age_trace must be (K, U) with K >= 1")
    return float(np.max(trace.mean(axis=0)))


def step_reward(ages: np.ndarray, variant: str = "max") -> float:
    """Per-slot freshness penalty.

    "max" (default): negative age of the stalest user, whose episode
    average matches the negated objective. "sum": negative total age,
    kept for ablation.
    """
    ages = np.asarray(ages, dtype=float)
    if variant == "max":
        return float(-np.max(ages))
    if variant == "sum":
        return float(-np.sum(ages))
    raise ValueError(f"unknown reward variant {variant!r}")
