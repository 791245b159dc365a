"""Acceptance suite: property checks plus scaled trend checks.

Each test is one acceptance criterion and prints a [PASS]/[FAIL] line
with its measured numbers. Training cells run on the desk profile over
five seeds and are disk-cached under ``acceptance_runs/`` keyed by the
resolved-config hash, so re-running the suite reuses finished cells.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from aerisim.config import load_config
from aerisim.oracles import run_all
from aerisim.sweep import run_cell

ACCEPT_DIR = Path(__file__).resolve().parent.parent / "acceptance_runs"
SEEDS = (0, 1, 2, 3, 4)
MAIN = ("ours", "no-ris", "random-traj", "matching")

_memo: dict = {}


def desk_cfg(num_users: int = 6, power_dbm: float = 20.0):
    cfg, _ = load_config(profile="desk")
    cfg.topology.num_users = num_users
    cfg.noma.power_max_dbm = power_dbm
    return cfg


def cell(policy: str, seed: int, num_users: int = 6, power_dbm: float = 20.0) -> dict:
    key = (policy, seed, num_users, power_dbm)
    if key not in _memo:
        _memo[key] = run_cell(desk_cfg(num_users, power_dbm), seed, policy, ACCEPT_DIR)
    return _memo[key]


def seed_mean_aaoi(policy: str, num_users: int = 6, power_dbm: float = 20.0) -> float:
    return float(np.mean([cell(policy, s, num_users, power_dbm)["aaoi"] for s in SEEDS]))


def report(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


class TestGradientCriterion:
    def test_all_loss_gradients_match_finite_differences(self):
        """DDQN TD loss, PPO clipped surrogate, and critic MSE vs central
        differences, 16 probes each, 1e-4 relative, under one minute."""
        from aerisim.ddqn import DdqnAgent, Transition
        from aerisim.nets import finite_difference_grad
        from aerisim.ppo import PpoAgent

        start = time.time()
        rng = np.random.default_rng(0)
        errs = {}

        # -- DDQN TD loss --------------------------------------------
        agent = DdqnAgent(input_dim=4, num_actions=3, hidden_sizes=(16,), lr=0.0,
                          grad_clip=None, batch_size=8, rng=rng)
        for _ in range(16):
            agent.replay.push(Transition(rng.normal(size=4), int(rng.integers(3)),
                                         float(rng.normal()), rng.normal(size=4), False))
        batch = agent.replay.sample(8, np.random.default_rng(1))
        X = np.stack([t.x for t in batch]); Xn = np.stack([t.x_next for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])

        def ddqn_loss():
            q = agent.main.forward(X)[np.arange(8), actions]
            a_star = np.argmax(agent.main.forward(Xn), axis=1)
            boot = agent.target.forward(Xn)[np.arange(8), a_star]
            return float(np.mean((q - rewards - agent.discount * boot) ** 2))

        q_all, cache = agent.main.forward_cache(X)
        a_star = np.argmax(agent.main.forward(Xn), axis=1)
        boot = agent.target.forward(Xn)[np.arange(8), a_star]
        err = q_all[np.arange(8), actions] - rewards - agent.discount * boot
        grad_out = np.zeros_like(q_all)
        grad_out[np.arange(8), actions] = 2.0 * err / 8
        flat = np.concatenate([g.ravel() for g in agent.main.backward(cache, grad_out)])
        probes = rng.choice(flat.size, size=16, replace=False)
        fd = finite_difference_grad(ddqn_loss, agent.main, probes)
        errs["ddqn"] = np.max(np.abs(flat[probes] - fd)) / max(np.max(np.abs(fd)), 1e-12)

        # -- PPO clipped surrogate -----------------------------------
        ppo = PpoAgent(input_dim=3, action_dim=2, hidden_sizes=(16,), grad_clip=None,
                       rng=np.random.default_rng(2))
        Xp = rng.normal(size=(10, 3))
        Z = rng.normal(size=(10, 2))
        mean0 = ppo.actor.forward(Xp)
        old_logp = ppo._log_prob(Z, mean0, ppo.log_std) + np.linspace(-0.4, 0.4, 10)
        adv = np.linspace(-2, 2, 10)

        def ppo_loss():
            m = ppo.actor.forward(Xp)
            lp = ppo._log_prob(Z, m, ppo.log_std)
            r = np.exp(lp - old_logp)
            c = np.clip(r, 0.8, 1.2)
            return float(-np.mean(np.minimum(r * adv, c * adv)))

        mean, cache = ppo.actor.forward_cache(Xp)
        logp = ppo._log_prob(Z, mean, ppo.log_std)
        ratio = np.exp(logp - old_logp)
        clipped = np.clip(ratio, 0.8, 1.2)
        active = (ratio * adv) <= (clipped * adv)
        dl = -(adv * ratio * active) / 10
        grad_mean = dl[:, None] * (Z - mean) / np.exp(2 * ppo.log_std)[None, :]
        flat = np.concatenate([g.ravel() for g in ppo.actor.backward(cache, grad_mean)])
        probes = rng.choice(flat.size, size=16, replace=False)
        fd = finite_difference_grad(ppo_loss, ppo.actor, probes)
        errs["ppo"] = np.max(np.abs(flat[probes] - fd)) / max(np.max(np.abs(fd)), 1e-12)

        # -- critic MSE ----------------------------------------------
        returns = rng.normal(size=10)

        def critic_loss():
            return float(np.mean((ppo.critic.forward(Xp)[:, 0] - returns) ** 2))

        v, cache = ppo.critic.forward_cache(Xp)
        grads = ppo.critic.backward(cache, (2 * (v[:, 0] - returns) / 10)[:, None])
        flat = np.concatenate([g.ravel() for g in grads])
        probes = rng.choice(flat.size, size=16, replace=False)
        fd = finite_difference_grad(critic_loss, ppo.critic, probes)
        errs["critic"] = np.max(np.abs(flat[probes] - fd)) / max(np.max(np.abs(fd)), 1e-12)

        elapsed = time.time() - start
        worst = max(errs.values())
        passed = worst < 1e-4 and elapsed < 60
        report("gradient-suite", passed,
               f"max rel err {worst:.2e} (ddqn {errs['ddqn']:.1e}, ppo {errs['ppo']:.1e}, "
               f"critic {errs['critic']:.1e}), {elapsed:.1f}s")
        assert passed


class TestOracleCriterion:
    def test_oracle_suite_passes_within_budget(self):
        start = time.time()
        results = run_all(seed=0)
        elapsed = time.time() - start
        ok = all(r.passed for r in results) and elapsed < 600
        detail = "; ".join(f"{r.name}={'ok' if r.passed else r.detail}" for r in results)
        report("oracle-suite", ok, f"{detail}; {elapsed:.0f}s")
        assert ok


class TestConvergenceCriterion:
    def test_return_improves_on_most_seeds(self):
        """Last-decile moving-average return beats the first decile by at
        least 20% of the first decile's gap to the random policy, on >= 4
        of 5 seeds."""
        passing = []
        details = []
        for s in SEEDS:
            ours = cell("ours", s)
            rnd = cell("random", s)
            returns = np.array([m["episode_return"] for m in ours["episodes"]])
            k = max(1, len(returns) // 10)
            ma = np.convolve(returns, np.ones(10) / 10, mode="valid")
            first, last = ma[:k].mean(), ma[-k:].mean()
            random_ret = np.mean([m["episode_return"] for m in rnd["episodes"]])
            gap = abs(first - random_ret)
            ok = last >= first + 0.2 * gap
            passing.append(ok)
            details.append(f"seed {s}: first {first:.1f} last {last:.1f} random {random_ret:.1f} -> {'ok' if ok else 'no'}")
        passed = sum(passing) >= 4
        report("convergence", passed, "; ".join(details))
        assert passed


class TestRankingCriterion:
    def test_ours_beats_matching_and_random_trajectory(self):
        ours = seed_mean_aaoi("ours")
        matching = seed_mean_aaoi("matching")
        random_traj = seed_mean_aaoi("random-traj")
        ordering = ours < matching < random_traj
        margins = ours <= 0.95 * matching and ours <= 0.92 * random_traj
        passed = ordering and margins
        report(
            "ranking", passed,
            f"AAoI ours {ours:.4f}, matching {matching:.4f} (ratio {ours / matching:.3f} <= 0.95), "
            f"random-traj {random_traj:.4f} (ratio {ours / random_traj:.3f} <= 0.92), "
            f"ordering {'holds' if ordering else 'violated'}",
        )
        assert passed


class TestRisBenefitCriterion:
    def test_reflectors_help(self):
        ours = seed_mean_aaoi("ours")
        no_ris = seed_mean_aaoi("no-ris")
        passed = ours < no_ris
        report("ris-benefit", passed, f"AAoI full {ours:.4f} vs no-RIS {no_ris:.4f}")
        assert passed


class TestUserScalingCriterion:
    def test_aaoi_increases_with_users_for_every_policy(self):
        lines = []
        passed = True
        for policy in MAIN:
            vals = [seed_mean_aaoi(policy, num_users=u) for u in (4, 6, 8)]
            mono = vals[0] < vals[1] < vals[2]
            passed = passed and mono
            lines.append(f"{policy}: {vals[0]:.4f} < {vals[1]:.4f} < {vals[2]:.4f} {'ok' if mono else 'VIOLATED'}")
        report("user-scaling", passed, "; ".join(lines))
        assert passed


class TestPowerTrendCriterion:
    def test_aaoi_non_increasing_in_power_budget(self):
        vals = [seed_mean_aaoi("ours", power_dbm=p) for p in (10.0, 15.0, 20.0)]
        passed = vals[0] >= vals[1] >= vals[2]
        report("power-trend", passed,
               f"AAoI at 10/15/20 dBm: {vals[0]:.4f} >= {vals[1]:.4f} >= {vals[2]:.4f}")
        assert passed


class TestFeasibilityCriterion:
    def test_zero_constraint_violations_across_all_cells(self):
        """The environment hard-asserts C1-C6, C8-C10 every slot; any
        violation fails the cell. Every acceptance cell must be ok."""
        bad = []
        for key, rec in _memo.items():
            if rec["status"] != "ok":
                bad.append(f"{key}: {rec['status']}")
        # also sweep the on-disk cache for failed cells from earlier runs
        for p in ACCEPT_DIR.glob("cell_*.json"):
            import json

            rec = json.loads(p.read_text())
            if rec["status"] != "ok":
                bad.append(f"{p.name}: {rec['status']}")
        passed = not bad
        report("feasibility", passed,
               f"{len(_memo)} in-session cells ok" if passed else "; ".join(bad))
        assert passed
