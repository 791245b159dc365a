"""MDP wrapper: state assembly, action encodings, feasibility projection.

The discrete side picks, per sub-carrier, one subset from a table built
over an age-ranked candidate pool. The continuous side carries UAV
displacements, a linear-phase reflector parameterization, and power
logits. Decoding always lands inside the feasible set (C1-C6, C8-C10);
the step asserts this every slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import aoi as aoi_mod
from . import channel as ch
from .config import ExperimentConfig
from .geometry import NetworkTopology, UavPose, check_pose, project_uav_move
from .noma import LinkDecision, all_rates, validate_decision
from .rngtools import StreamBundle


def subset_table(pool_size: int, cluster_size: int) -> list[tuple[int, ...]]:
    """Per-sub-carrier action table over candidate-pool positions.

    Entry 0 is the empty set, then singletons, then all cluster-size
    subsets in lexicographic order.
    """
    q = min(cluster_size, pool_size)
    table: list[tuple[int, ...]] = [()]
    table += [(i,) for i in range(pool_size)]
    if q >= 2:
        table += list(combinations(range(pool_size), q))
    return table


@dataclass
class EnvState:
    """s_k = previous-slot UAV positions, per-user backlog, per-user age."""

    slot: int
    pose: UavPose
    aoi: aoi_mod.AoiState
    last_gain: np.ndarray    # (U, N) effective gains from the previous slot

    def copy(self) -> "EnvState":
        return EnvState(
            slot=self.slot,
            pose=UavPose(xy=self.pose.xy.copy(), altitude=self.pose.altitude),
            aoi=self.aoi.copy(),
            last_gain=self.last_gain.copy(),
        )


class UplinkEnv:
    """Sequential, seedable uplink environment.

    One instance is strictly sequential; run independent instances (with
    their own seeds) for parallel evaluation.
    """

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = int(seed)
        self.params = cfg.channel_params()
        self.traffic = cfg.traffic_params()
        self.limits = cfg.power_limits()
        self.N = cfg.noma.num_subcarriers
        self.J = cfg.topology.num_uavs
        self.slot_duration = cfg.topology.slot_duration
        self.horizon = cfg.run.slots_per_episode
        self.pool_size = min(cfg.env.candidate_width, cfg.topology.num_users)
        self.table = subset_table(self.pool_size, cfg.noma.cluster_size)
        self.topo: NetworkTopology | None = None
        self.state: EnvState | None = None
        self._streams: StreamBundle | None = None

    # -- dimensions ---------------------------------------------------

    @property
    def U(self) -> int:
        return self.cfg.topology.num_users

    @property
    def num_discrete_actions(self) -> int:
        return len(self.table)

    @property
    def feature_dim(self) -> int:
        return 2 * self.J + 3 * self.U

    @property
    def discrete_input_dim(self) -> int:
        """Base features, coverage, decision progress, pool-ordered SNR."""
        return self.feature_dim + 2 * self.pool_size + 1

    @property
    def continuous_dim(self) -> int:
        per_uav = 2 + (self.topo_num_elements() if self.cfg.env.per_element_phases else 2) + 1
        return self.J * per_uav + self.U * self.N

    def topo_num_elements(self) -> int:
        return self.cfg.topology.num_elements

    @property
    def continuous_input_dim(self) -> int:
        """PPO observes pose/age/backlog features plus the assignment."""
        return self.feature_dim - self.U + self.U * self.N

    # -- reset --------------------------------------------------------

    def reset(self) -> EnvState:
        """Start an episode: fixed user layout, fresh random UAV placement.

        User positions are drawn once per environment instance; repeated
        resets advance the placement stream only for the UAV start.
        """
        if self._streams is None:
            self._streams = StreamBundle(self.seed)
        rng = self._streams.get("placement")
        t = self.cfg.topology
        half = t.arena_size / 2.0
        if self.topo is None:
            xy = rng.uniform(-half, half, size=(self.U, 2))
            users = np.hstack([xy, np.zeros((self.U, 1))])
            self.topo = self.cfg.build_topology(users)

        r_xy = self.topo.max_horizontal_radius
        # start region: launch disc around the receiver, inside the arena
        r_start = min(r_xy, half, t.spawn_radius)
        for _ in range(10_000):
            pos = rng.uniform(-r_start, r_start, size=(self.J, 2))
            pos = pos[np.linalg.norm(pos, axis=1) <= r_start]
            if pos.shape[0] < self.J:
                continue
            pose = UavPose(xy=pos[: self.J], altitude=t.uav_altitude)
            if not check_pose(pose, self.topo):
                break
        else:
            raise RuntimeError("could not place UAVs: min_uav_separation too large for the fleet")

        state = EnvState(
            slot=1,
            pose=pose,
            aoi=aoi_mod.AoiState.initial(self.U, self.slot_duration),
            last_gain=self._pathloss_gain(),
        )
        self.state = state
        return state.copy()

    def _pathloss_gain(self) -> np.ndarray:
        """Distance-based expected direct-link gain, used before any draw."""
        d = np.linalg.norm(self.topo.user_positions - self.topo.cu_position[None, :], axis=1)
        g = self.params.ref_path_gain * d ** (-self.params.alpha_nlos) * self.topo.num_antennas
        return np.repeat(g[:, None], self.N, axis=1)

    # -- feature encoding --------------------------------------------

    def features(self, state: EnvState) -> np.ndarray:
        """Flattened, normalized state in [-1, 1]."""
        t = self.cfg.topology
        pos = (state.pose.xy / t.coverage_radius).ravel()
        ages = state.aoi.age / (self.horizon * self.slot_duration)
        backlog = state.aoi.backlog / (10.0 * self.traffic.packet_size)
        csi = self._csi(state)
        return np.clip(np.concatenate([pos, ages, backlog, csi]), -1.0, 1.0)

    def _csi(self, state: EnvState) -> np.ndarray:
        """(U,) log-compressed per-user SNR at full mask power, one slot stale.

        User layouts re-randomize every episode, so without this the
        policy cannot tell a cell-edge user from a near one; the matching
        heuristic reads the same stale gains.
        """
        snr = state.last_gain.max(axis=1) * self.limits.power_mask / self.params.noise_power
        return np.log10(1.0 + snr) / 4.0

    def candidate_pool(self, state: EnvState) -> np.ndarray:
        """Top candidates: backlogged users first, each group by age
        descending, ties toward lower index.

        Pool positions thereby carry stable semantics ("stalest user with
        data waiting" at position 0), which the discrete head's subset
        table indexes into.
        """
        has_data = state.aoi.backlog > 0
        order = np.lexsort((np.arange(self.U), -state.aoi.age, ~has_data))
        return order[: self.pool_size]

    def discrete_input(self, features: np.ndarray, chosen: list[int], state: EnvState) -> np.ndarray:
        """Network input for the next sequential sub-carrier choice.

        Earlier choices are summarized as per-pool-position coverage
        (how often each position is already scheduled, scaled by 1/N)
        plus a scalar decision progress, so "avoid already-covered
        users" is directly visible rather than buried in action indices.
        The stale per-user SNR is repeated in pool order so channel
        quality lines up with the positions the subset table indexes.
        """
        coverage = np.zeros(self.pool_size)
        for c in chosen:
            for pos in self.table[int(c)]:
                coverage[pos] += 1.0 / self.N
        progress = np.array([len(chosen) / self.N])
        pool_csi = self._csi(state)[self.candidate_pool(state)]
        return np.concatenate([features, coverage, progress, pool_csi])

    def continuous_input(self, features: np.ndarray, assignment: np.ndarray | None = None) -> np.ndarray:
        """PPO input: pose/age/backlog features plus the flat (U, N)
        assignment (-1 when absent).

        The stale-SNR block is for the scheduling head only; the
        continuous decode is already channel-anchored, and feeding the
        gain readings to the actor/critic destabilized training.
        """
        if assignment is None:
            flat = np.full(self.U * self.N, -1.0)
        else:
            flat = np.asarray(assignment, dtype=float).ravel()
        return np.concatenate([features[: self.feature_dim - self.U], flat])

    # -- decoding -----------------------------------------------------

    def decode_discrete(self, action: tuple[int, ...], state: EnvState) -> np.ndarray:
        """(U, N) binary assignment from per-sub-carrier table indices.

        A user transmits on at most one sub-carrier per slot (each user
        joins at most one cluster), so a pool position already scheduled
        by an earlier sub-carrier is dropped from later subsets.
        """
        if len(action) != self.N:
            raise ValueError(f"expected {self.N} sub-carrier choices, got {len(action)}")
        pool = self.candidate_pool(state)
        assignment = np.zeros((self.U, self.N), dtype=int)
        for n, idx in enumerate(action):
            for pos in self.table[int(idx)]:
                u = pool[pos]
                if assignment[u].sum() == 0:
                    assignment[u, n] = 1
        return assignment

    def encode_assignment(self, assignment: np.ndarray, state: EnvState) -> tuple[int, ...]:
        """Per-sub-carrier table indices whose decode best reproduces
        `assignment`.

        The table only expresses candidate-pool members and subset sizes
        {0, 1, cluster_size}; users outside the pool and surplus positions
        are dropped (highest pool position first).
        """
        pool = list(self.candidate_pool(state))
        index = {s: i for i, s in enumerate(self.table)}
        action = []
        for n in range(self.N):
            users = np.nonzero(np.asarray(assignment)[:, n])[0]
            positions = tuple(sorted(pool.index(u) for u in users if u in pool))
            while positions not in index:
                positions = positions[:-1]
            action.append(index[positions])
        return tuple(action)

    def split_continuous(self, raw: np.ndarray) -> dict:
        """Slice the flat continuous vector into named parts."""
        raw = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(raw)):
            raise ValueError("non-finite continuous action")
        if raw.shape != (self.continuous_dim,):
            raise ValueError(f"continuous action must have shape ({self.continuous_dim},)")
        J, N, U = self.J, self.N, self.U
        i = 0
        delta = raw[i : i + 2 * J].reshape(J, 2); i += 2 * J
        if self.cfg.env.per_element_phases:
            L = self.topo_num_elements()
            phase_raw = raw[i : i + J * L].reshape(J, L); i += J * L
        else:
            phase_raw = raw[i : i + 2 * J].reshape(J, 2); i += 2 * J
        beta_raw = raw[i : i + J]; i += J
        logits = raw[i :].reshape(U, N)
        return {"delta": delta, "phase_raw": phase_raw, "beta_raw": beta_raw, "logits": logits}

    def alignment_slopes(self, state: EnvState) -> np.ndarray:
        """(J,) geometric conjugate-alignment phase slope per UAV.

        Each UAV aims its reflection at the j-th oldest backlogged user
        (oldest overall when nobody is backlogged): the element-l phase
        that cancels the combined LoS steering of the incoming and
        outgoing hops is linear in l with slope pi*(psi_cu - psi_ue),
        where psi are the direction cosines toward the receiver and the
        targeted user. Both are known geometry (positions), not channel
        state. The continuous action trims around this alignment; raw
        phase search over the element aperture is a needle-shaped
        objective that gradient policies cannot climb at this scale.
        """
        has_data = state.aoi.backlog > 0
        order = np.lexsort((np.arange(self.U), -state.aoi.age, ~has_data))
        xy = state.pose.xy
        pos3 = state.pose.positions_3d()
        slopes = np.zeros(self.J)
        for j in range(self.J):
            u = int(order[j % self.U])
            diff = self.topo.user_positions[u] - pos3[j]
            psi_ue = diff[0] / float(np.linalg.norm(diff))
            psi_cu = xy[j, 0] / float(np.linalg.norm(pos3[j]))
            slopes[j] = 2 * np.pi * self.topo.element_spacing_over_wavelength * (psi_cu - psi_ue)
        return slopes

    def decode_continuous(self, raw: np.ndarray, assignment: np.ndarray) -> tuple[np.ndarray, ch.ReflectionConfig, np.ndarray]:
        """Map the raw vector to (uav_delta, reflection, powers).

        Phases are the geometric conjugate alignment for each UAV's
        target user plus the learned trim (offset and slope, or
        per-element offsets). Powers are squashed to
        [power_mask / 2, power_mask] per assigned pair, then rescaled per
        user onto the total budget, so C5 and C6 hold by construction.
        The half-mask floor keeps an assigned user transmitting at a
        useful level whatever the raw logit: zeroing a scheduled user is
        never helpful here (dropping it from the sub-carrier is the
        cheaper discrete action), and the floor keeps early policy noise
        from silently starving users. Reflection amplitudes get the same
        [1/2, 1] floor for the same reason.
        """
        parts = self.split_continuous(raw)
        L = self.topo_num_elements()
        # learned moves are damped: an episode-long actor bias at full
        # speed walks a UAV out of the serviceable region faster than the
        # critic can attribute the slowly-accruing age cost, so the
        # decode bounds drift while keeping repositioning expressive
        delta = parts["delta"] * self.topo.max_step * self.cfg.env.delta_gain

        ell = np.arange(L)
        aim = self.alignment_slopes(self.state)[:, None] * ell[None, :]
        if self.cfg.env.per_element_phases:
            phases = np.mod(aim + np.pi * parts["phase_raw"], 2 * np.pi)
        else:
            # slope trim spans +-pi across the whole aperture (not per
            # element) so action noise cannot decohere the far elements
            span = ell[None, :] / max(L - 1, 1)
            lin = np.pi * parts["phase_raw"][:, 0:1] + np.pi * parts["phase_raw"][:, 1:2] * span
            phases = np.mod(aim + lin, 2 * np.pi)
        if self.cfg.env.force_beta is not None:
            beta = np.full(self.J, self.cfg.env.force_beta)
        else:
            beta = 0.75 + 0.25 * np.clip(parts["beta_raw"], -1.0, 1.0)
        reflection = ch.ReflectionConfig(
            amplitude=np.repeat(beta[:, None], L, axis=1), phase=phases
        )

        frac = 0.75 + 0.25 * np.clip(parts["logits"], -1.0, 1.0)
        powers = frac * self.limits.power_mask * assignment
        totals = powers.sum(axis=1)
        over = totals > self.limits.power_max
        if np.any(over):
            powers[over] *= (self.limits.power_max / totals[over])[:, None]
        return delta, reflection, powers

    # -- slot dynamics ------------------------------------------------

    def draw_channels(self, pose: UavPose, reflection: ch.ReflectionConfig) -> ch.ChannelRealization:
        """Draw this slot's fading and compose the effective channel."""
        rng = self._streams.get("fading")
        h_direct = ch.sample_direct_channel(self.topo, self.params, self.N, rng)
        h_ue_uav = ch.sample_ue_uav_channel(self.topo, pose, self.params, self.N, rng)
        g = ch.uav_cu_channel(self.topo, pose, self.params)
        return ch.compose_effective_channel(h_direct, h_ue_uav, g, reflection)

    def outcome(
        self,
        state: EnvState,
        channels: ch.ChannelRealization,
        assignment: np.ndarray,
        powers: np.ndarray,
        reflection: ch.ReflectionConfig,
    ) -> tuple[np.ndarray, aoi_mod.AoiState, float]:
        """Deterministic tail of a slot: rates, age update, reward."""
        decision = LinkDecision(
            assignment=assignment, powers=powers, reflection=reflection,
            uav_delta=np.zeros((self.J, 2)),
        )
        rates = all_rates(
            channels, decision, self.params.bandwidth, self.params.noise_power,
            self.cfg.env.interference_from_earlier,
        )
        new_aoi = aoi_mod.step_aoi(state.aoi, rates, state.slot, self.slot_duration)
        reward = aoi_mod.step_reward(new_aoi.age, self.cfg.env.reward_variant)
        return rates, new_aoi, reward

    def step(self, discrete: tuple[int, ...], continuous: np.ndarray):
        """Advance one slot from a discrete action tuple and raw continuous vector."""
        assignment = self.decode_discrete(discrete, self.state)
        return self.step_decision(assignment, continuous)

    def step_decision(
        self,
        assignment: np.ndarray,
        continuous: np.ndarray,
        powers_override: np.ndarray | None = None,
        delta_override: np.ndarray | None = None,
    ):
        """Advance one slot; returns (next_state, reward, record).

        All decision sources (learned policies and baselines) funnel
        through this path. Overrides replace the decoded powers or UAV
        displacements before projection and validation.
        """
        state = self.state
        delta, reflection, powers = self.decode_continuous(continuous, assignment)
        if powers_override is not None:
            powers = powers_override * assignment
        if delta_override is not None:
            delta = np.asarray(delta_override, dtype=float)

        new_pose = project_uav_move(state.pose, delta, self.topo)
        pose_violations = check_pose(new_pose, self.topo)

        decision = LinkDecision(
            assignment=assignment, powers=powers, reflection=reflection, uav_delta=delta
        )
        report = validate_decision(decision, self.limits)
        if report.violations or pose_violations:
            raise AssertionError(
                "infeasible decision reached the environment: "
                + "; ".join(report.violations + pose_violations)
            )

        channels = self.draw_channels(new_pose, reflection)
        rates, new_aoi, reward = self.outcome(state, channels, assignment, powers, reflection)
        next_aoi = aoi_mod.generate_traffic(
            new_aoi, self.traffic, state.slot + 1, self._streams.get("traffic")
        )
        record = {
            "slot": state.slot,
            "ages": new_aoi.age.copy(),
            "rates": rates,
            "positions": new_pose.xy.copy(),
            "reward": reward,
            "feasible": True,
        }
        self.state = EnvState(
            slot=state.slot + 1,
            pose=new_pose,
            aoi=next_aoi,
            last_gain=channels.effective_gain(),
        )
        return self.state.copy(), reward, record
