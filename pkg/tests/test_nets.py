import numpy as np
import pytest

from aerisim.nets import Adam, Mlp, finite_difference_grad, soft_update


def rel_err(a, b):
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return np.max(np.abs(a - b)) / denom


class TestMlpForward:
    def test_linear_net_matches_matmul(self):
        rng = np.random.default_rng(0)
        net = Mlp([3, 2], rng)
        x = rng.normal(size=3)
        np.testing.assert_allclose(net.forward(x), x @ net.weights[0] + net.biases[0])

    def test_batch_and_single_agree(self):
        rng = np.random.default_rng(1)
        net = Mlp([4, 8, 3], rng)
        X = rng.normal(size=(5, 4))
        batch = net.forward(X)
        for i in range(5):
            np.testing.assert_allclose(net.forward(X[i]), batch[i], rtol=1e-12)

    def test_relu_only_on_hidden(self):
        rng = np.random.default_rng(2)
        net = Mlp([2, 4, 1], rng)
        # force a strongly negative output; a ReLU output head could not go below 0
        net.weights[1][...] = -10.0
        net.biases[1][...] = -5.0
        x = np.abs(rng.normal(size=2))
        assert net.forward(x)[0] < 0

    def test_needs_two_sizes(self):
        with pytest.raises(ValueError):
            Mlp([3], np.random.default_rng(0))


class TestFlatParams:
    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        net = Mlp([3, 5, 2], rng)
        flat = net.get_flat()
        twin = Mlp([3, 5, 2], np.random.default_rng(99))
        twin.set_flat(flat)
        x = rng.normal(size=3)
        np.testing.assert_allclose(net.forward(x), twin.forward(x))

    def test_wrong_length_rejected(self):
        net = Mlp([2, 2], np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.set_flat(np.zeros(3))

    def test_clone_is_independent(self):
        net = Mlp([2, 3, 1], np.random.default_rng(4))
        twin = net.clone()
        net.weights[0][...] += 1.0
        assert not np.allclose(net.get_flat(), twin.get_flat())


class TestBackward:
    @pytest.mark.parametrize("sizes", [[3, 2], [4, 8, 3], [5, 16, 8, 2]])
    def test_gradient_matches_finite_differences(self, sizes):
        """Oracle: backprop vs central differences on 16 random indices."""
        rng = np.random.default_rng(10)
        net = Mlp(sizes, rng)
        X = rng.normal(size=(6, sizes[0]))
        target = rng.normal(size=(6, sizes[-1]))

        def loss():
            return float(np.mean((net.forward(X) - target) ** 2))

        y, cache = net.forward_cache(X)
        grad_out = 2.0 * (y - target) / y.size
        grads = net.backward(cache, grad_out)
        flat_grad = np.concatenate([g.ravel() for g in grads])
        probes = rng.choice(flat_grad.size, size=min(16, flat_grad.size), replace=False)
        fd = finite_difference_grad(loss, net, probes)
        assert rel_err(flat_grad[probes], fd) < 1e-4

    def test_gradient_single_sample(self):
        rng = np.random.default_rng(11)
        net = Mlp([3, 6, 1], rng)
        x = rng.normal(size=3)

        def loss():
            return float(net.forward(x)[0] ** 2)

        y, cache = net.forward_cache(x)
        grads = net.backward(cache, np.array([2.0 * y[0]]))
        flat_grad = np.concatenate([g.ravel() for g in grads])
        probes = np.arange(0, flat_grad.size, max(1, flat_grad.size // 12))
        fd = finite_difference_grad(loss, net, probes)
        assert rel_err(flat_grad[probes], fd) < 1e-4


class TestAdam:
    def test_descends_quadratic(self):
        p = [np.array([5.0, -3.0])]
        opt = Adam(p, lr=0.1)
        for _ in range(500):
            opt.step([2.0 * p[0]])
        np.testing.assert_allclose(p[0], 0.0, atol=1e-3)

    def test_global_norm_clipping(self):
        p = [np.zeros(2), np.zeros(3)]
        opt = Adam(p, lr=1.0, grad_clip=1.0)
        g = [np.full(2, 10.0), np.full(3, 10.0)]
        opt.step(g)
        # the supplied gradient lists are untouched; clipping happens on a copy
        assert np.all(g[0] == 10.0)

    def test_first_step_size_is_lr(self):
        p = [np.array([1.0])]
        opt = Adam(p, lr=0.01)
        opt.step([np.array([123.0])])
        # bias-corrected Adam's first step has magnitude ~lr regardless of scale
        assert p[0][0] == pytest.approx(1.0 - 0.01, rel=1e-5)


class TestSoftUpdate:
    def test_convex_combination(self):
        a = Mlp([2, 3], np.random.default_rng(0))
        b = Mlp([2, 3], np.random.default_rng(1))
        expected = 0.1 * a.get_flat() + 0.9 * b.get_flat()
        soft_update(b, a, tau=0.1)
        np.testing.assert_allclose(b.get_flat(), expected)

    def test_tau_one_copies(self):
        a = Mlp([2, 3], np.random.default_rng(2))
        b = Mlp([2, 3], np.random.default_rng(3))
        soft_update(b, a, tau=1.0)
        np.testing.assert_allclose(b.get_flat(), a.get_flat())
