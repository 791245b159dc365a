"""Small dense networks with explicit backprop.

The agents only need modest MLPs (two rectified hidden layers, linear
output), so forward and backward passes are written out directly; every
loss gradient is validated against central finite differences in the
test suite.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Fully-connected net: linear layers with ReLU between them.

    ``sizes`` lists layer widths input-first; ``sizes == [d_in, d_out]``
    gives a plain linear map.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    # -- parameter plumbing ------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.parameters():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size
        if i != flat.size:
            raise ValueError("flat parameter vector has wrong length")

    def copy_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    def clone(self) -> "Mlp":
        twin = Mlp(self.sizes, np.random.default_rng(0))
        twin.copy_from(self)
        return twin

    # -- passes -------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cache(x)
        return y

    def forward_cache(self, x: np.ndarray):
        """Forward pass keeping pre-activations for backprop.

        Accepts (d,) or (batch, d); output matches the input arity.
        """
        squeeze = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        activations = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < len(self.weights) - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            activations.append(h)
        out = activations[-1]
        return (out[0] if squeeze else out), activations

    def backward(self, activations: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss given d loss / d output.

        Returns gradients ordered like ``parameters()``.
        """
        grad = np.atleast_2d(np.asarray(grad_out, dtype=float))
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = activations[i]
            grads_w[i] = h_in.T @ grad
            grads_b[i] = grad.sum(axis=0)
            if i > 0:
                grad = grad @ self.weights[i].T
                grad = grad * (activations[i] > 0)   # ReLU mask
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.extend([gw, gb])
        return out


class Adam:
    """Adam over a list of parameter arrays, with global-norm clipping."""

    def __init__(self, params: list[np.ndarray], lr: float, grad_clip: float | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.grad_clip = grad_clip
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if self.grad_clip is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.grad_clip and norm > 0:
                grads = [g * (self.grad_clip / norm) for g in grads]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = b1 * m + (1 - b1) * g
            v[...] = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def soft_update(target: Mlp, main: Mlp, tau: float) -> None:
    """target <- tau * main + (1 - tau) * target."""
    for t, m in zip(target.parameters(), main.parameters()):
        t[...] = tau * m + (1 - tau) * t


def finite_difference_grad(loss_fn, net: Mlp, probes: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. selected flat indices."""
    flat = net.get_flat()
    out = np.zeros(probes.size)
    for k, idx in enumerate(probes):
        saved = flat[idx]
        flat[idx] = saved + h
        net.set_flat(flat)
        up = loss_fn()
        flat[idx] = saved - h
        net.set_flat(flat)
        down = loss_fn()
        flat[idx] = saved
        net.set_flat(flat)
        out[k] = (up - down) / (2 * h)
    return out
