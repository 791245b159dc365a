"""Independent brute-force checks of the main decision pipeline.

Each oracle recomputes a quantity by enumeration or an independent
reimplementation and compares it against the production path. They back
both the test suite and the ``oracle`` CLI subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import aoi as aoi_mod
from .config import ExperimentConfig, load_config
from .ddqn import DdqnAgent, Transition
from .env import UplinkEnv
from .noma import LinkDecision, SicOrder, build_sic_order, received_powers
from .rngtools import stream


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str


# -- (a) single-slot exhaustive search -------------------------------

def _tiny_config() -> ExperimentConfig:
    cfg, _ = load_config(
        {
            "topology": {"num_users": 3, "num_uavs": 1, "num_elements": 4},
            "noma": {"num_subcarriers": 2, "cluster_size": 2},
            "env": {"candidate_width": 3},
        }
    )
    return cfg


def _randomize_state(env: UplinkEnv, rng: np.random.Generator) -> None:
    """Scramble ages/backlogs/pose into a random reachable-looking state."""
    st = env.state
    st.aoi.age = (1 + rng.integers(0, 10, size=env.U)) * env.slot_duration
    packets = rng.integers(0, 3, size=env.U)
    st.aoi.backlog = packets * env.traffic.packet_size
    st.aoi.generation_slot = np.where(
        packets > 0, np.maximum(1, st.slot - rng.integers(0, 5, size=env.U)), -1
    )
    st.slot = int(st.slot + rng.integers(0, 5))


def single_slot_exhaustive(num_states: int = 50, agent_samples: int = 20, seed: int = 0) -> OracleResult:
    """Exhaustive discrete-tuple x power-grid search is never beaten.

    Pose and reflection are frozen (zero raw action) and the slot's
    fading is drawn once, so every candidate decision faces the same
    channel. Agent candidates draw random tuples and continuous power
    logits.
    """
    cfg = _tiny_config()
    rng = stream(seed, "oracle-exhaustive")
    failures = []
    for trial in range(num_states):
        env = UplinkEnv(cfg, seed=int(rng.integers(0, 2**31)))
        env.reset()
        _randomize_state(env, rng)
        state = env.state

        frozen_raw = np.zeros(env.continuous_dim)
        assignment0 = np.zeros((env.U, env.N), dtype=int)
        _, reflection, _ = env.decode_continuous(frozen_raw, assignment0)
        channels = env.draw_channels(state.pose, reflection)

        def reward_of(assignment: np.ndarray, logits: np.ndarray) -> float:
            raw = frozen_raw.copy()
            raw[-env.U * env.N :] = logits.ravel()
            _, _, powers = env.decode_continuous(raw, assignment)
            _, _, r = env.outcome(state, channels, assignment, powers, reflection)
            return r

        # exhaustive: every tuple, grid {-1, 0, 1} per assigned pair
        best = -np.inf
        tuples = list(product(range(env.num_discrete_actions), repeat=env.N))
        for tup in tuples:
            assignment = env.decode_discrete(tup, state)
            pairs = np.argwhere(assignment == 1)
            for combo in product((-1.0, 0.0, 1.0), repeat=len(pairs)):
                logits = np.full((env.U, env.N), -1.0)
                for (u, n), level in zip(pairs, combo):
                    logits[u, n] = level
                best = max(best, reward_of(assignment, logits))

        for _ in range(agent_samples):
            tup = tuple(rng.integers(0, env.num_discrete_actions, size=env.N))
            assignment = env.decode_discrete(tup, state)
            logits = rng.uniform(-1.0, 1.0, size=(env.U, env.N))
            r = reward_of(assignment, logits)
            if r > best + 1e-12:
                failures.append(f"state {trial}: agent reward {r} beats exhaustive best {best}")
    return OracleResult(
        "single-slot-exhaustive",
        not failures,
        failures[0] if failures else f"{num_states} states, exhaustive best never beaten",
    )


# -- (b) SIC order vs permutation enumeration ------------------------

def sic_permutation_check(num_instances: int = 200, seed: int = 0) -> OracleResult:
    """The sorted order matches enumeration over all permutations.

    A permutation is valid when every earlier user has received power >=
    every later one; among valid permutations the lexicographically
    smallest user sequence is the deterministic choice.
    """
    from itertools import permutations

    rng = stream(seed, "oracle-sic")
    failures = []
    for trial in range(num_instances):
        U, N = 3, 1
        gains = rng.uniform(0.1, 5.0, size=(U, N))
        powers = rng.uniform(0.001, 0.01, size=(U, N))
        if trial % 5 == 0:
            gains[1] = gains[0]
            powers[1] = powers[0]      # force ties sometimes

        class _Chan:
            def effective_gain(self):
                return gains

        from .channel import ReflectionConfig

        decision = LinkDecision(
            assignment=np.ones((U, N), dtype=int),
            powers=powers,
            reflection=ReflectionConfig(np.ones((1, 2)), np.zeros((1, 2))),
            uav_delta=np.zeros((1, 2)),
        )
        chan = _Chan()
        got = build_sic_order(chan, decision).per_subcarrier[0]

        rx = received_powers(chan, decision)[:, 0]
        valid = [
            p
            for p in permutations(range(U))
            if all(rx[p[i]] >= rx[p[i + 1]] - 1e-15 for i in range(U - 1))
        ]
        expected = min(valid)
        if tuple(got) != expected:
            failures.append(f"instance {trial}: got {tuple(got)}, expected {expected}")
    return OracleResult(
        "sic-permutation",
        not failures,
        failures[0] if failures else f"{num_instances} instances matched",
    )


# -- (c) AoI trace vs independent reimplementation -------------------

def _reference_aoi_trace(
    arrivals_bits: np.ndarray,
    arrival_slots: np.ndarray,
    rates: np.ndarray,
    slot_duration: float,
) -> np.ndarray:
    """Straight-line age recursion over explicit pending updates.

    Fresh arrivals supersede an undelivered older update; delivery
    requires the pending update to fit in the slot at the given rate.
    arrivals_bits/arrival_slots: (K, U); rates: (K, U). Returns (K, U)
    ages after each slot.
    """
    K, U = rates.shape
    ages = np.zeros((K, U))
    current = np.full(U, slot_duration)
    pending: list[tuple[int, float] | None] = [None] * U
    for k in range(1, K + 1):
        for u in range(U):
            if arrivals_bits[k - 1, u] > 0:
                pending[u] = (int(arrival_slots[k - 1, u]), float(arrivals_bits[k - 1, u]))
            r = rates[k - 1, u]
            if pending[u] is not None and r > 0 and pending[u][1] / r <= slot_duration:
                gen = pending[u][0]
                current[u] = (k - gen) * slot_duration + slot_duration
                pending[u] = None
            else:
                current[u] = current[u] + slot_duration
            ages[k - 1, u] = current[u]
    return ages


def aoi_trace_check(num_schedules: int = 100, num_slots: int = 20, seed: int = 0) -> OracleResult:
    """step_aoi/generate_traffic agree exactly with the queue-based recursion."""
    rng = stream(seed, "oracle-aoi")
    delta = 0.1
    failures = []
    for trial in range(num_schedules):
        U = 3
        arrivals = rng.integers(0, 2, size=(num_slots, U)) * 1000.0
        arrival_slots = np.tile(np.arange(1, num_slots + 1)[:, None], (1, U))
        rates = rng.choice([0.0, 5_000.0, 50_000.0], size=(num_slots, U))

        state = aoi_mod.AoiState.initial(U, delta)
        trace = np.zeros((num_slots, U))
        for k in range(1, num_slots + 1):
            # inject the deterministic arrivals of this schedule
            fresh = arrivals[k - 1] > 0
            state.generation_slot[fresh] = k
            state.backlog[fresh] = arrivals[k - 1][fresh]
            state = aoi_mod.step_aoi(state, rates[k - 1], k, delta)
            trace[k - 1] = state.age

        expected = _reference_aoi_trace(arrivals, arrival_slots, rates, delta)
        if not np.array_equal(trace, expected):
            failures.append(f"schedule {trial}: max diff {np.max(np.abs(trace - expected))}")
    return OracleResult(
        "aoi-trace",
        not failures,
        failures[0] if failures else f"{num_schedules} schedules matched exactly",
    )


# -- (d) chain MDP vs tabular value iteration ------------------------

def chain_mdp_check(
    max_steps: int = 50_000, tol: float = 1e-2, seed: int = 0, discount: float = 0.8
) -> OracleResult:
    """A linear-net double-Q learner recovers the tabular optimum.

    Three-state chain, two actions (left/right); moving right from the
    last state pays 1 and stays. Q* comes from value iteration.
    """
    S, A = 3, 2

    def transition(s: int, a: int) -> tuple[int, float]:
        if a == 1:      # right
            if s == S - 1:
                return s, 1.0
            return s + 1, 1.0 if s + 1 == S - 1 else 0.0
        return max(0, s - 1), 0.0

    # tabular value iteration
    q_star = np.zeros((S, A))
    for _ in range(10_000):
        q_new = np.zeros_like(q_star)
        for s in range(S):
            for a in range(A):
                s2, r = transition(s, a)
                q_new[s, a] = r + discount * np.max(q_star[s2])
        if np.max(np.abs(q_new - q_star)) < 1e-12:
            q_star = q_new
            break
        q_star = q_new

    rng = stream(seed, "oracle-chain")
    agent = DdqnAgent(
        input_dim=S, num_actions=A, hidden_sizes=(), lr=5e-3, discount=discount,
        tau=0.05, replay_capacity=5000, batch_size=64, grad_clip=None, rng=rng,
    )
    onehot = np.eye(S)
    s = 0
    err = np.inf
    for step in range(max_steps):
        a = agent.select(onehot[s], epsilon=0.3, rng=rng)
        s2, r = transition(s, a)
        agent.replay.push(Transition(onehot[s], a, r, onehot[s2], False))
        s = s2
        if len(agent.replay) > agent.batch_size and step % 2 == 0:
            agent.update(rng)
            agent.update_target()
        if step % 500 == 0:
            q = agent.main.forward(onehot)
            err = float(np.max(np.abs(q - q_star)))
            if err < tol:
                return OracleResult("chain-mdp", True, f"converged at step {step}, max error {err:.2e}")
    return OracleResult("chain-mdp", False, f"max error {err:.3g} after {max_steps} steps")


def run_all(seed: int = 0) -> list[OracleResult]:
    return [
        single_slot_exhaustive(seed=seed),
        sic_permutation_check(seed=seed),
        aoi_trace_check(seed=seed),
        chain_mdp_check(seed=seed),
    ]
