import numpy as np
import pytest

from aerisim.config import load_config
from aerisim.env import UplinkEnv, subset_table
from aerisim.geometry import check_pose
from aerisim.noma import LinkDecision, validate_decision


def make_env(seed=0, **doc):
    base = {
        "topology": {"num_users": 4, "num_uavs": 2, "num_elements": 8},
        "noma": {"num_subcarriers": 2, "cluster_size": 2},
        "env": {"candidate_width": 4},
    }
    for k, v in doc.items():
        base.setdefault(k, {}).update(v)
    cfg, _ = load_config(base)
    env = UplinkEnv(cfg, seed)
    env.reset()
    return env


class TestSubsetTable:
    def test_small_counts(self):
        # empty + 2 singletons + C(2,2) = 4
        assert len(subset_table(2, 2)) == 4
        # empty + 6 singletons + C(6,2) = 22
        assert len(subset_table(6, 2)) == 22

    def test_first_entry_empty_then_singletons(self):
        t = subset_table(3, 2)
        assert t[0] == ()
        assert t[1:4] == [(0,), (1,), (2,)]
        assert t[4:] == [(0, 1), (0, 2), (1, 2)]

    def test_cluster_capped_by_pool(self):
        t = subset_table(2, 5)
        assert t == [(), (0,), (1,), (0, 1)]

    def test_cluster_one_has_no_pairs(self):
        assert subset_table(3, 1) == [(), (0,), (1,), (2,)]


class TestReset:
    def test_deterministic_layout_per_seed(self):
        a = make_env(seed=3)
        b = make_env(seed=3)
        np.testing.assert_array_equal(a.topo.user_positions, b.topo.user_positions)
        np.testing.assert_array_equal(a.state.pose.xy, b.state.pose.xy)

    def test_seeds_differ(self):
        a = make_env(seed=1)
        b = make_env(seed=2)
        assert not np.allclose(a.topo.user_positions, b.topo.user_positions)

    def test_user_layout_fixed_across_episodes(self):
        env = make_env(seed=5)
        users = env.topo.user_positions.copy()
        pose1 = env.state.pose.xy.copy()
        env.reset()
        np.testing.assert_array_equal(env.topo.user_positions, users)
        assert not np.allclose(env.state.pose.xy, pose1)   # new UAV placement

    def test_many_resets_feasible(self):
        env = make_env(seed=7)
        for _ in range(1000):
            state = env.reset()
            assert check_pose(state.pose, env.topo) == []
            assert np.all(np.abs(env.topo.user_positions[:, :2]) <= env.cfg.topology.arena_size / 2)

    def test_initial_aoi(self):
        env = make_env(seed=0)
        np.testing.assert_allclose(env.state.aoi.age, env.slot_duration)
        assert env.state.slot == 1


class TestFeatures:
    def test_bounds_and_dimension(self):
        env = make_env(seed=1)
        f = env.features(env.state)
        assert f.shape == (env.feature_dim,)
        assert np.all(f >= -1.0) and np.all(f <= 1.0)

    def test_age_saturates(self):
        env = make_env(seed=1)
        env.state.aoi.age[...] = 1e9
        f = env.features(env.state)
        assert np.all(f[2 * env.J : 2 * env.J + env.U] == 1.0)

    def test_candidate_pool_age_ranked(self):
        env = make_env(seed=2)
        env.state.aoi.age = np.array([0.3, 0.9, 0.9, 0.1])
        pool = env.candidate_pool(env.state)
        np.testing.assert_array_equal(pool, [1, 2, 0, 3])

    def test_candidate_pool_backlogged_first(self):
        env = make_env(seed=2)
        env.state.aoi.age = np.array([0.3, 0.9, 0.9, 0.1])
        env.state.aoi.backlog = np.array([0.0, 0.0, 1e4, 1e4])
        pool = env.candidate_pool(env.state)
        np.testing.assert_array_equal(pool, [2, 3, 1, 0])

    def test_discrete_input_coverage(self):
        env = make_env(seed=0)
        f = env.features(env.state)
        fd = env.feature_dim
        x = env.discrete_input(f, [], env.state)
        assert x.shape == (env.discrete_input_dim,)
        np.testing.assert_array_equal(x[fd : fd + env.pool_size], 0.0)
        assert x[fd + env.pool_size] == 0.0
        # choose the singleton covering pool position 2
        action = env.table.index((2,))
        x2 = env.discrete_input(f, [action], env.state)
        cov = x2[fd : fd + env.pool_size]
        assert cov[2] == pytest.approx(1.0 / env.N)
        assert cov.sum() == pytest.approx(1.0 / env.N)
        assert x2[fd + env.pool_size] == pytest.approx(1.0 / env.N)

    def test_discrete_input_pool_csi(self):
        env = make_env(seed=0)
        f = env.features(env.state)
        pool = env.candidate_pool(env.state)
        x = env.discrete_input(f, [], env.state)
        snr = env.state.last_gain.max(axis=1) * env.limits.power_mask / env.params.noise_power
        expected = np.log10(1.0 + snr)[pool] / 4.0
        np.testing.assert_allclose(x[-env.pool_size :], expected)

    def test_continuous_input_carries_assignment(self):
        env = make_env(seed=0)
        f = env.features(env.state)
        x = env.continuous_input(f, None)
        np.testing.assert_array_equal(x[-env.U * env.N :], -1.0)
        assignment = np.zeros((env.U, env.N), dtype=int)
        assignment[1, 0] = 1
        x2 = env.continuous_input(f, assignment)
        np.testing.assert_array_equal(
            x2[-env.U * env.N :], assignment.ravel().astype(float)
        )


class TestDecoding:
    def test_decode_discrete_uses_pool(self):
        env = make_env(seed=4)
        env.state.aoi.age = np.array([0.1, 0.2, 0.9, 0.5])
        pool = env.candidate_pool(env.state)       # [2, 3, 1, 0]
        a = env.decode_discrete((1, 0), env.state)  # singleton {pool[0]} then empty
        assert a[pool[0], 0] == 1
        assert a.sum() == 1

    def test_decode_discrete_drops_duplicate_user(self):
        env = make_env(seed=4)
        env.state.aoi.age = np.array([0.1, 0.2, 0.9, 0.5])
        pool = env.candidate_pool(env.state)
        a = env.decode_discrete((1, 1), env.state)  # singleton {pool[0]} twice
        assert a[pool[0], 0] == 1
        assert a[pool[0], 1] == 0                   # one cluster per slot
        assert a.sum() == 1

    def test_encode_assignment_roundtrip(self):
        env = make_env(seed=4)
        env.state.aoi.age = np.array([0.1, 0.2, 0.9, 0.5])
        env.state.aoi.backlog = np.array([1.0, 1.0, 1.0, 1.0])
        pool = env.candidate_pool(env.state)
        a = np.zeros((env.U, env.N), dtype=int)
        a[pool[0], 0] = 1
        a[pool[2], 0] = 1
        a[pool[1], 1] = 1
        action = env.encode_assignment(a, env.state)
        np.testing.assert_array_equal(env.decode_discrete(action, env.state), a)

    def test_encode_assignment_drops_outside_pool(self):
        env = make_env(seed=4, env={"candidate_width": 3})
        env.state.aoi.age = np.array([0.1, 0.2, 0.9, 0.5])
        env.state.aoi.backlog = np.array([1.0, 1.0, 1.0, 1.0])
        pool = list(env.candidate_pool(env.state))
        outside = next(u for u in range(env.U) if u not in pool)
        a = np.zeros((env.U, env.N), dtype=int)
        a[outside, 0] = 1
        a[pool[1], 0] = 1
        action = env.encode_assignment(a, env.state)
        decoded = env.decode_discrete(action, env.state)
        assert decoded[pool[1], 0] == 1
        assert decoded.sum() == 1

    def test_decode_discrete_wrong_arity(self):
        env = make_env(seed=0)
        with pytest.raises(ValueError):
            env.decode_discrete((0,), env.state)

    def test_decoded_actions_always_feasible(self):
        """Fuzz: 2000 random raw action pairs all satisfy C1-C6, C8-C10."""
        env = make_env(seed=6)
        rng = np.random.default_rng(0)
        for _ in range(2000):
            tup = tuple(rng.integers(0, env.num_discrete_actions, size=env.N))
            raw = rng.uniform(-5.0, 5.0, size=env.continuous_dim)   # beyond [-1, 1]
            assignment = env.decode_discrete(tup, env.state)
            delta, reflection, powers = env.decode_continuous(raw, assignment)
            decision = LinkDecision(
                assignment=assignment, powers=powers, reflection=reflection, uav_delta=delta
            )
            assert validate_decision(decision, env.limits).ok

    def test_power_floor_and_midpoint(self):
        env = make_env(seed=0)
        assignment = np.zeros((env.U, env.N), dtype=int)
        assignment[0, 0] = 1
        # neutral logit sits at three quarters of the mask
        _, _, powers = env.decode_continuous(np.zeros(env.continuous_dim), assignment)
        assert powers[0, 0] == pytest.approx(0.75 * env.limits.power_mask)
        assert powers.sum() == pytest.approx(0.75 * env.limits.power_mask)
        # the most negative logit still transmits at half the mask
        _, _, low = env.decode_continuous(np.full(env.continuous_dim, -9.0), assignment)
        assert low[0, 0] == pytest.approx(env.limits.power_mask / 2)

    def test_power_budget_rescale(self):
        """Full logits on every sub-carrier trigger the per-user rescale."""
        env = make_env(seed=0, noma={"power_max_dbm": 5.0})   # budget == mask
        raw = np.zeros(env.continuous_dim)
        raw[-env.U * env.N :] = 1.0
        assignment = np.ones((env.U, env.N), dtype=int)
        _, _, powers = env.decode_continuous(raw, assignment)
        totals = powers.sum(axis=1)
        np.testing.assert_allclose(totals, env.limits.power_max, rtol=1e-12)

    def test_beta_floored_at_half(self):
        env = make_env(seed=0)
        raw = np.full(env.continuous_dim, -1.0)
        _, reflection, _ = env.decode_continuous(raw, np.zeros((env.U, env.N), dtype=int))
        assert np.all(reflection.amplitude == 0.5)
        raw2 = np.full(env.continuous_dim, 1.0)
        _, reflection2, _ = env.decode_continuous(raw2, np.zeros((env.U, env.N), dtype=int))
        assert np.all(reflection2.amplitude == 1.0)

    def test_force_beta(self):
        env = make_env(seed=0, env={"force_beta": 1e-9})
        raw = np.ones(env.continuous_dim)
        _, reflection, _ = env.decode_continuous(raw, np.zeros((env.U, env.N), dtype=int))
        assert np.all(reflection.amplitude == 1e-9)

    def test_linear_phase_profile(self):
        env = make_env(seed=0)
        raw = np.zeros(env.continuous_dim)
        parts = env.split_continuous(raw)
        parts["phase_raw"][0] = [0.5, 0.25]
        # rebuild the raw vector with the phase slice set
        raw[2 * env.J : 2 * env.J + 2] = [0.5, 0.25]
        _, reflection, _ = env.decode_continuous(raw, np.zeros((env.U, env.N), dtype=int))
        L = env.topo_num_elements()
        ell = np.arange(L)
        aim = env.alignment_slopes(env.state)[0] * ell
        trim = np.pi * 0.5 + np.pi * 0.25 * ell / (L - 1)
        np.testing.assert_allclose(reflection.phase[0], np.mod(aim + trim, 2 * np.pi))

    def test_per_element_phase_mode(self):
        env = make_env(seed=0, env={"per_element_phases": True})
        L = env.topo_num_elements()
        assert env.continuous_dim == env.J * (2 + L + 1) + env.U * env.N
        raw = np.zeros(env.continuous_dim)
        _, reflection, _ = env.decode_continuous(raw, np.zeros((env.U, env.N), dtype=int))
        # neutral trims leave the pure geometric alignment
        ell = np.arange(L)
        aim = env.alignment_slopes(env.state)[:, None] * ell[None, :]
        np.testing.assert_allclose(reflection.phase, np.mod(aim, 2 * np.pi))

    def test_non_finite_raw_rejected(self):
        env = make_env(seed=0)
        raw = np.zeros(env.continuous_dim)
        raw[0] = np.inf
        with pytest.raises(ValueError):
            env.split_continuous(raw)

    def test_linear_phase_matches_elementwise_alignment(self):
        """Oracle: with a dominant LoS link the best linear-phase profile
        reaches >= 95% of the per-element coordinate-ascent optimum."""
        cfg, _ = load_config(
            {
                "topology": {"num_users": 1, "num_uavs": 1, "num_elements": 8,
                              "num_antennas": 1},
                "noma": {"num_subcarriers": 1, "cluster_size": 1},
                "channel": {"rician_k": 30.0},
                "env": {"candidate_width": 1},
            }
        )
        env = UplinkEnv(cfg, seed=9)
        env.reset()
        state = env.state
        raw = np.zeros(env.continuous_dim)
        assignment = np.ones((1, 1), dtype=int)
        _, refl0, _ = env.decode_continuous(raw, assignment)
        chans = env.draw_channels(state.pose, refl0)
        a = chans.g_uav_cu[0, 0, :] * np.conj(chans.h_ue_uav[0, 0, :, 0])
        direct = chans.h_direct[0, 0, 0]

        def mag(phases):
            return np.abs(direct + np.sum(a * np.exp(1j * phases)))

        # per-element coordinate ascent over a 16-level grid (2 sweeps)
        levels = 2 * np.pi * np.arange(16) / 16
        best = np.zeros(8)
        for _ in range(2):
            for l in range(8):
                trials = [best.copy() for _ in levels]
                for t, lv in zip(trials, levels):
                    t[l] = lv
                best = trials[int(np.argmax([mag(t) for t in trials]))]
        elementwise = mag(best)

        # linear profile over a 64 x 64 grid of (offset, slope)
        grid = np.linspace(-1.0, 1.0, 64)
        ell = np.arange(8)
        linear = max(
            mag(np.mod(np.pi * p0 + np.pi * p1 * ell, 2 * np.pi))
            for p0 in grid
            for p1 in grid
        )
        assert linear >= 0.95 * elementwise


class TestStep:
    def test_step_advances_slot_and_keeps_feasible(self):
        env = make_env(seed=8)
        rng = np.random.default_rng(1)
        for _ in range(30):
            tup = tuple(rng.integers(0, env.num_discrete_actions, size=env.N))
            raw = rng.uniform(-1.0, 1.0, size=env.continuous_dim)
            before = env.state.slot
            state, reward, record = env.step(tup, raw)
            assert state.slot == before + 1
            assert record["feasible"]
            assert reward <= 0.0
            assert check_pose(state.pose, env.topo) == []

    def test_null_action_rates_zero(self):
        env = make_env(seed=0)
        raw = np.zeros(env.continuous_dim)
        _, _, record = env.step(tuple([0] * env.N), raw)
        np.testing.assert_array_equal(record["rates"], 0.0)

    def test_step_deterministic_across_instances(self):
        def run(seed):
            env = make_env(seed=seed)
            rng = np.random.default_rng(42)
            out = []
            for _ in range(10):
                tup = tuple(rng.integers(0, env.num_discrete_actions, size=env.N))
                raw = rng.uniform(-1.0, 1.0, size=env.continuous_dim)
                _, reward, _ = env.step(tup, raw)
                out.append(reward)
            return np.array(out)

        np.testing.assert_array_equal(run(11), run(11))

    def test_reward_is_negative_worst_age(self):
        env = make_env(seed=3)
        raw = np.zeros(env.continuous_dim)
        _, reward, record = env.step(tuple([0] * env.N), raw)
        assert reward == pytest.approx(-np.max(record["ages"]))
