"""Double DQN over the factorized sub-carrier assignment head.

One slot produces one transition per sub-carrier: the network input is
the state features plus the prefix of earlier sub-carrier choices, and
all transitions of a slot share the slot reward. The target decouples
action selection (main net) from evaluation (target net).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import Adam, Mlp, soft_update


@dataclass
class Transition:
    x: np.ndarray
    action: int
    reward: float
    x_next: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO ring buffer of transitions."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: list[Transition] = []
        self._pos = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, tr: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(tr)
        else:
            self._data[self._pos] = tr
            self._pos = (self._pos + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self._data), size=batch_size)
        return [self._data[i] for i in idx]


class DdqnAgent:
    """Main/target Q-networks with epsilon-greedy selection."""

    def __init__(
        self,
        input_dim: int,
        num_actions: int,
        hidden_sizes: tuple = (400, 30),
        lr: float = 1e-4,
        discount: float = 0.8,
        tau: float = 0.01,
        replay_capacity: int = 10000,
        batch_size: int = 128,
        grad_clip: float | None = 1.0,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        sizes = [input_dim, *hidden_sizes, num_actions]
        self.main = Mlp(sizes, rng)
        self.target = Mlp(sizes, rng)
        self.target.copy_from(self.main)
        self.opt = Adam(self.main.parameters(), lr=lr, grad_clip=grad_clip)
        self.discount = discount
        self.tau = tau
        self.batch_size = batch_size
        self.replay = ReplayBuffer(replay_capacity)
        self.num_actions = num_actions

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.main.forward(x)

    def select(self, x: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        """Epsilon-greedy index; greedy ties break toward the lowest index."""
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if rng.random() < epsilon:
            return int(rng.integers(0, self.num_actions))
        return int(np.argmax(self.q_values(x)))

    def update(self, rng: np.random.Generator) -> float:
        """One minibatch gradient step; returns the pre-step loss."""
        if len(self.replay) < self.batch_size:
            raise ValueError("replay holds fewer samples than one batch")
        batch = self.replay.sample(self.batch_size, rng)
        X = np.stack([t.x for t in batch])
        Xn = np.stack([t.x_next for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        done = np.array([t.done for t in batch], dtype=bool)

        q_all, cache = self.main.forward_cache(X)
        q_sa = q_all[np.arange(len(batch)), actions]

        # double-Q target: argmax under main weights, value under target weights
        next_main = self.main.forward(Xn)
        next_target = self.target.forward(Xn)
        a_star = np.argmax(next_main, axis=1)
        bootstrap = next_target[np.arange(len(batch)), a_star]
        y = rewards + self.discount * bootstrap * (~done)

        err = q_sa - y
        loss = float(np.mean(err**2))
        grad_out = np.zeros_like(q_all)
        grad_out[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
        grads = self.main.backward(cache, grad_out)
        self.opt.step(grads)
        return loss

    def update_target(self) -> None:
        soft_update(self.target, self.main, self.tau)
