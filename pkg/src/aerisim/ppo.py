"""PPO with a clipped surrogate over squashed Gaussian actions.

The actor outputs a pre-squash mean; a state-independent log-std per
dimension is trained alongside it. Actions are tanh-squashed into
[-1, 1] and log-probabilities carry the change-of-variables correction.
Probability ratios compare the current policy against the log-probs
recorded at collection time, so the first epoch over a fresh rollout has
ratio exactly 1; a trailing copy of the actor is additionally maintained
by soft replacement for snapshot use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import Adam, Mlp, soft_update

LOG_2PI = float(np.log(2.0 * np.pi))
SQUASH_EPS = 1e-8


@dataclass
class Rollout:
    """One episode of on-policy experience."""

    obs: list = field(default_factory=list)
    pre_squash: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    last_value: float = 0.0

    def __len__(self) -> int:
        return len(self.obs)

    def clear(self) -> None:
        self.obs.clear()
        self.pre_squash.clear()
        self.log_probs.clear()
        self.rewards.clear()
        self.values.clear()
        self.last_value = 0.0


def gae_advantages(
    rewards: np.ndarray, values: np.ndarray, last_value: float, discount: float, lam: float
) -> np.ndarray:
    """Generalized advantage estimates over one episode."""
    T = rewards.shape[0]
    adv = np.zeros(T)
    next_v = last_value
    acc = 0.0
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + discount * next_v - values[t]
        acc = delta + discount * lam * acc
        adv[t] = acc
        next_v = values[t]
    return adv


class PpoAgent:
    """Actor-critic pair with separate learning rates."""

    def __init__(
        self,
        input_dim: int,
        action_dim: int,
        hidden_sizes: tuple = (400, 30),
        actor_lr: float = 1e-5,
        critic_lr: float = 1e-4,
        clip_epsilon: float = 0.2,
        discount: float = 0.8,
        gae_lambda: float = 0.95,
        epochs: int = 4,
        tau: float = 0.01,
        grad_clip: float | None = 1.0,
        init_log_std: float = -0.5,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.actor = Mlp([input_dim, *hidden_sizes, action_dim], rng)
        self.critic = Mlp([input_dim, *hidden_sizes, 1], rng)
        self.log_std = np.full(action_dim, init_log_std)
        self.old_actor = self.actor.clone()
        self.old_log_std = self.log_std.copy()
        self.actor_opt = Adam(self.actor.parameters() + [self.log_std], lr=actor_lr, grad_clip=grad_clip)
        self.critic_opt = Adam(self.critic.parameters(), lr=critic_lr, grad_clip=grad_clip)
        self.clip_epsilon = clip_epsilon
        self.discount = discount
        self.gae_lambda = gae_lambda
        self.epochs = epochs
        self.tau = tau
        self.action_dim = action_dim

    # -- sampling -----------------------------------------------------

    def _log_prob(self, z: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
        """Per-sample log-probability of squashed actions tanh(z)."""
        std = np.exp(log_std)
        gauss = -0.5 * ((z - mean) / std) ** 2 - log_std - 0.5 * LOG_2PI
        squash = np.log(1.0 - np.tanh(z) ** 2 + SQUASH_EPS)
        return np.sum(gauss - squash, axis=-1)

    def sample(self, x: np.ndarray, rng: np.random.Generator):
        """Return (action in [-1,1]^d, pre-squash sample, log-prob, value)."""
        mean = self.actor.forward(x)
        std = np.exp(self.log_std)
        z = mean + std * rng.standard_normal(self.action_dim)
        action = np.tanh(z)
        logp = float(self._log_prob(z[None, :], mean[None, :], self.log_std)[0])
        value = float(self.critic.forward(x)[0])
        return action, z, logp, value

    def deterministic_action(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(self.actor.forward(x))

    def value(self, x: np.ndarray) -> float:
        return float(self.critic.forward(x)[0])

    # -- update -------------------------------------------------------

    def update(self, rollout: Rollout) -> tuple[float, float]:
        """Optimize the clipped surrogate and the value loss over one rollout.

        Returns the first-epoch (policy loss, value loss).
        """
        X = np.stack(rollout.obs)
        Z = np.stack(rollout.pre_squash)
        old_logp = np.asarray(rollout.log_probs)
        rewards = np.asarray(rollout.rewards)
        values = np.asarray(rollout.values)

        adv_raw = gae_advantages(rewards, values, rollout.last_value, self.discount, self.gae_lambda)
        returns = adv_raw + values
        std_a = adv_raw.std()
        adv = (adv_raw - adv_raw.mean()) / std_a if std_a > 1e-8 else adv_raw

        first_pi_loss = first_v_loss = 0.0
        for epoch in range(self.epochs):
            pi_loss = self._policy_step(X, Z, old_logp, adv)
            v_loss = self._value_step(X, returns)
            if epoch == 0:
                first_pi_loss, first_v_loss = pi_loss, v_loss

        soft_update(self.old_actor, self.actor, self.tau)
        self.old_log_std = self.tau * self.log_std + (1 - self.tau) * self.old_log_std
        return first_pi_loss, first_v_loss

    def _policy_step(self, X, Z, old_logp, adv) -> float:
        mean, cache = self.actor.forward_cache(X)
        logp = self._log_prob(Z, mean, self.log_std)
        ratio = np.exp(logp - old_logp)
        clipped = np.clip(ratio, 1.0 - self.clip_epsilon, 1.0 + self.clip_epsilon)
        surr = np.minimum(ratio * adv, clipped * adv)
        loss = float(-np.mean(surr))

        B = X.shape[0]
        # derivative flows only where the unclipped branch attains the min
        active = (ratio * adv) <= (clipped * adv)
        dl_dlogp = -(adv * ratio * active) / B
        std2 = np.exp(2.0 * self.log_std)
        grad_mean = dl_dlogp[:, None] * (Z - mean) / std2[None, :]
        grad_log_std = np.sum(dl_dlogp[:, None] * (((Z - mean) ** 2) / std2[None, :] - 1.0), axis=0)
        grads = self.actor.backward(cache, grad_mean) + [grad_log_std]
        self.actor_opt.step(grads)
        return loss

    def _value_step(self, X, returns) -> float:
        v, cache = self.critic.forward_cache(X)
        v = v[:, 0]
        err = v - returns
        loss = float(np.mean(err**2))
        grad_out = (2.0 * err / X.shape[0])[:, None]
        grads = self.critic.backward(cache, grad_out)
        self.critic_opt.step(grads)
        return loss
