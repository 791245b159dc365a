"""Training loop interleaving the discrete and continuous learners.

Per slot: the discrete head picks sub-carrier subsets sequentially under
an epsilon-greedy rule, the continuous head samples displacements,
reflection parameters, and power logits conditioned on the discrete
choice, the environment executes both, and the shared slot reward is
stored in the replay buffer and the on-policy rollout alike. Replay
updates start once the buffer exceeds one batch; the target network and
the trailing policy copy follow by soft replacement.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .aoi import objective_aaoi
from .baselines import NO_RIS_BETA, RandomWaypointWalker, matching_assignment
from .config import ExperimentConfig, resolve
from .ddqn import DdqnAgent, Transition
from .env import UplinkEnv
from .ppo import PpoAgent, Rollout
from .rngtools import StreamBundle

POLICIES = ("ours", "no-ris", "random-traj", "matching", "random")

# Moving-average window (episodes) for best-checkpoint selection.
BEST_WINDOW = 20


class TrainingDiverged(RuntimeError):
    """Raised when a loss turns non-finite; parameters are rolled back."""

    def __init__(self, episode: int):
        super().__init__(f"non-finite loss during episode {episode}; restored last episode-end parameters")
        self.episode = episode


@dataclass
class EpisodeMetrics:
    episode: int
    episode_return: float
    aaoi: float
    ddqn_loss: float
    policy_loss: float
    value_loss: float
    epsilon: float


@dataclass
class AgentBundle:
    ddqn: DdqnAgent
    ppo: PpoAgent

    def snapshot(self) -> dict[str, np.ndarray]:
        return {
            "ddqn_main": self.ddqn.main.get_flat(),
            "ddqn_target": self.ddqn.target.get_flat(),
            "ppo_actor": self.ppo.actor.get_flat(),
            "ppo_critic": self.ppo.critic.get_flat(),
            "ppo_log_std": self.ppo.log_std.copy(),
            "ppo_old_actor": self.ppo.old_actor.get_flat(),
            "ppo_old_log_std": self.ppo.old_log_std.copy(),
        }

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        self.ddqn.main.set_flat(snap["ddqn_main"])
        self.ddqn.target.set_flat(snap["ddqn_target"])
        self.ppo.actor.set_flat(snap["ppo_actor"])
        self.ppo.critic.set_flat(snap["ppo_critic"])
        self.ppo.log_std[...] = snap["ppo_log_std"]
        self.ppo.old_actor.set_flat(snap["ppo_old_actor"])
        self.ppo.old_log_std[...] = snap["ppo_old_log_std"]


def config_hash(cfg: ExperimentConfig) -> str:
    doc = json.dumps(resolve(cfg), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def save_bundle(bundle: AgentBundle, cfg: ExperimentConfig, path) -> None:
    np.savez(path, config_hash=np.array(config_hash(cfg)), **bundle.snapshot())


def load_bundle(bundle: AgentBundle, cfg: ExperimentConfig, path) -> None:
    data = np.load(path, allow_pickle=False)
    stored = str(data["config_hash"])
    if stored != config_hash(cfg):
        raise ValueError(f"checkpoint config hash {stored} does not match current config")
    bundle.restore({k: data[k] for k in data.files if k != "config_hash"})


class Trainer:
    """Runs one (config, seed, policy) cell."""

    def __init__(self, cfg: ExperimentConfig, seed: int, policy: str = "ours"):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        if policy == "no-ris" and cfg.env.force_beta is None:
            cfg.env.force_beta = NO_RIS_BETA
        self.cfg = cfg
        self.seed = int(seed)
        self.policy = policy
        self.env = UplinkEnv(cfg, seed)
        self.streams = StreamBundle(seed)
        a = cfg.agent
        init_rng = self.streams.get("agent-init")
        self.bundle = AgentBundle(
            ddqn=DdqnAgent(
                input_dim=self.env.discrete_input_dim,
                num_actions=self.env.num_discrete_actions,
                hidden_sizes=tuple(a.hidden_sizes),
                lr=a.ddqn_lr,
                discount=a.discount,
                tau=a.tau,
                replay_capacity=a.replay_capacity,
                batch_size=a.batch_size,
                grad_clip=a.grad_clip,
                rng=init_rng,
            ),
            ppo=PpoAgent(
                input_dim=self.env.continuous_input_dim,
                action_dim=self.env.continuous_dim,
                hidden_sizes=tuple(a.hidden_sizes),
                actor_lr=a.actor_lr,
                critic_lr=a.critic_lr,
                clip_epsilon=a.clip_epsilon,
                discount=a.discount,
                gae_lambda=a.gae_lambda,
                epochs=a.ppo_epochs,
                tau=a.tau,
                grad_clip=a.grad_clip,
                init_log_std=a.init_log_std,
                rng=init_rng,
            ),
        )
        self.rollout = Rollout()
        self.metrics: list[EpisodeMetrics] = []
        self.walker = RandomWaypointWalker(
            self.env.J,
            cfg.topology.max_speed * cfg.topology.slot_duration,
            cfg.topology.arena_size / 2.0,
        )
        self._uniform_power = min(
            self.env.limits.power_mask, self.env.limits.power_max / self.env.N
        )

    # -- schedules ----------------------------------------------------

    def epsilon(self, episode: int) -> float:
        a = self.cfg.agent
        if self.policy == "random":
            return 1.0
        span = max(1, int(self.cfg.run.episodes * a.eps_decay_fraction))
        frac = min(1.0, episode / span)
        return a.eps_start + frac * (a.eps_end - a.eps_start)

    # -- one slot -----------------------------------------------------

    def _discrete_choice(
        self, features: np.ndarray, eps: float, rng, state, guide: tuple[int, ...] | None = None
    ) -> tuple[list[int], list[np.ndarray]]:
        """Sequential per-sub-carrier choices.

        With probability eps/2 a step follows the deferred-acceptance
        demonstration `guide` instead of the epsilon-greedy draw, so the
        replay buffer contains age-aware pairings from the first episodes
        rather than waiting for uniform exploration to stumble on them.
        """
        chosen: list[int] = []
        inputs: list[np.ndarray] = []
        for n in range(self.env.N):
            x = self.env.discrete_input(features, chosen, state)
            inputs.append(x)
            if guide is not None and rng.random() < eps / 2.0:
                chosen.append(int(guide[n]))
            else:
                chosen.append(self.bundle.ddqn.select(x, eps, rng))
        return chosen, inputs

    def _run_slot(self, state, eps: float, train: bool, action_rng) -> tuple[float, dict]:
        env = self.env
        features = env.features(state)

        if self.policy == "matching":
            assignment = matching_assignment(
                state.aoi.age, state.aoi.backlog, state.last_gain, env.N,
                self.cfg.noma.cluster_size,
            )
            chosen, inputs = None, None
        else:
            guide = None
            if train and eps > 0.0 and self.policy != "random":
                guide = env.encode_assignment(
                    matching_assignment(
                        state.aoi.age, state.aoi.backlog, state.last_gain, env.N,
                        self.cfg.noma.cluster_size,
                    ),
                    state,
                )
            chosen, inputs = self._discrete_choice(features, eps, action_rng, state, guide)
            assignment = env.decode_discrete(tuple(chosen), state)

        s_con = env.continuous_input(features, assignment)
        if self.policy == "random":
            raw = action_rng.uniform(-1.0, 1.0, size=env.continuous_dim)
            z = logp = value = None
        else:
            raw, z, logp, value = self.bundle.ppo.sample(s_con, action_rng)

        delta_override = None
        powers_override = None
        if self.policy == "random-traj":
            delta_override = self.walker.delta(
                state.pose.xy, self.streams.get("baseline")
            )
        if self.policy == "matching":
            powers_override = np.full((env.U, env.N), self._uniform_power)

        next_state, reward, record = env.step_decision(
            assignment, raw, powers_override=powers_override, delta_override=delta_override
        )
        done = next_state.slot > self.env.horizon

        if train and self.policy != "random":
            if inputs is not None:
                next_features = env.features(next_state)
                x_next = env.discrete_input(next_features, [], next_state)
                for x, a in zip(inputs, chosen):
                    self.bundle.ddqn.replay.push(Transition(x, a, reward, x_next, done))
            self.rollout.obs.append(s_con)
            self.rollout.pre_squash.append(z)
            self.rollout.log_probs.append(logp)
            self.rollout.rewards.append(reward)
            self.rollout.values.append(value)
        return reward, record

    # -- episodes -----------------------------------------------------

    def run_episode(self, episode: int, train: bool = True) -> EpisodeMetrics:
        env = self.env
        env.reset()
        self.walker.reset()
        if self.policy == "random":
            eps = 1.0
        elif train:
            eps = self.epsilon(episode)
        else:
            eps = 0.0
        action_rng = self.streams.get("action")
        update_rng = self.streams.get("update")
        a = self.cfg.agent

        ages = []
        total = 0.0
        ddqn_losses = []
        self.rollout.clear()
        for slot in range(self.cfg.run.slots_per_episode):
            reward, record = self._run_slot(env.state, eps, train, action_rng)
            total += reward
            ages.append(record["ages"])
            if train and self.policy not in ("random", "matching"):
                if (
                    len(self.bundle.ddqn.replay) > a.batch_size
                    and slot % a.ddqn_update_period == 0
                ):
                    loss = self.bundle.ddqn.update(update_rng)
                    if not np.isfinite(loss):
                        raise TrainingDiverged(episode)
                    ddqn_losses.append(loss)
                    if slot % a.target_update_period == 0:
                        self.bundle.ddqn.update_target()

        pi_loss = v_loss = 0.0
        if train and self.policy != "random" and len(self.rollout):
            final_features = env.features(env.state)
            self.rollout.last_value = self.bundle.ppo.value(
                env.continuous_input(final_features, None)
            )
            pi_loss, v_loss = self.bundle.ppo.update(self.rollout)
            if not (np.isfinite(pi_loss) and np.isfinite(v_loss)):
                raise TrainingDiverged(episode)

        return EpisodeMetrics(
            episode=episode,
            episode_return=total,
            aaoi=objective_aaoi(np.stack(ages)),
            ddqn_loss=float(np.mean(ddqn_losses)) if ddqn_losses else 0.0,
            policy_loss=pi_loss,
            value_loss=v_loss,
            epsilon=eps,
        )

    def train(self) -> list[EpisodeMetrics]:
        """Run the configured number of episodes; returns per-episode metrics.

        Keeps a snapshot of the parameters at the best moving-average
        training return and restores it when the loop ends, so evaluation
        sees the best policy found rather than whatever the final episode
        left behind (off-policy updates can degrade late in a short run).
        """
        window = min(BEST_WINDOW, self.cfg.run.episodes)
        snap = self.bundle.snapshot()
        best_snap = snap
        best_ma = -np.inf
        self.best_episode = 0
        for episode in range(self.cfg.run.episodes):
            try:
                m = self.run_episode(episode, train=self.policy != "random")
            except TrainingDiverged:
                self.bundle.restore(snap)
                raise
            self.metrics.append(m)
            snap = self.bundle.snapshot()
            if len(self.metrics) >= window:
                ma = float(np.mean([x.episode_return for x in self.metrics[-window:]]))
                if ma > best_ma:
                    best_ma = ma
                    best_snap = snap
                    self.best_episode = episode
        self.bundle.restore(best_snap)
        return self.metrics

    def evaluate(self, episodes: int | None = None, record_traces: bool = False):
        """Frozen-policy rollouts (greedy discrete, mean continuous action).

        Returns (mean AAoI, mean return, traces); traces is a list of
        per-slot record lists when requested.
        """
        episodes = episodes or self.cfg.run.eval_episodes
        env = self.env
        rng = self.streams.get("eval")
        aaois, returns, traces = [], [], []
        for _ in range(episodes):
            env.reset()
            self.walker.reset()
            ages, total, recs = [], 0.0, []
            for _ in range(self.cfg.run.slots_per_episode):
                reward, record = self._eval_slot(env.state, rng)
                total += reward
                ages.append(record["ages"])
                recs.append(record)
            aaois.append(objective_aaoi(np.stack(ages)))
            returns.append(total)
            if record_traces:
                traces.append(recs)
        return float(np.mean(aaois)), float(np.mean(returns)), traces

    def _eval_slot(self, state, rng) -> tuple[float, dict]:
        env = self.env
        features = env.features(state)
        if self.policy == "matching":
            assignment = matching_assignment(
                state.aoi.age, state.aoi.backlog, state.last_gain, env.N,
                self.cfg.noma.cluster_size,
            )
            chosen = None
        else:
            chosen = []
            for _ in range(env.N):
                x = env.discrete_input(features, chosen, state)
                if self.policy == "random":
                    chosen.append(int(rng.integers(0, env.num_discrete_actions)))
                else:
                    chosen.append(int(np.argmax(self.bundle.ddqn.q_values(x))))
            assignment = env.decode_discrete(tuple(chosen), state)
        s_con = env.continuous_input(features, assignment)
        if self.policy == "random":
            raw = rng.uniform(-1.0, 1.0, size=env.continuous_dim)
        else:
            raw = self.bundle.ppo.deterministic_action(s_con)
        delta_override = None
        powers_override = None
        if self.policy == "random-traj":
            delta_override = self.walker.delta(state.pose.xy, self.streams.get("baseline"))
        if self.policy == "matching":
            powers_override = np.full((env.U, env.N), self._uniform_power)
        _, reward, record = env.step_decision(
            assignment, raw, powers_override=powers_override, delta_override=delta_override
        )
        return reward, record
