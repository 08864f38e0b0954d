"""Small numpy MLP (ReLU hidden layers, tanh output) with manual backprop,
plus the SGD and Adam update rules used to train it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PolicyNetwork:
    """Weights are stored (fan_in, fan_out) so a batch forward is ``x @ W + b``."""

    weights: list
    biases: list

    @classmethod
    def create(cls, hidden=(100, 50), n_in=9, n_out=2, rng=None):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng() if rng is None else rng
        sizes = (n_in, *hidden, n_out)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, hidden=(100, 50), n_in=9, n_out=2):
        sizes = (n_in, *hidden, n_out)
        return cls(
            [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
            [np.zeros(b) for b in sizes[1:]],
        )

    @property
    def sizes(self):
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """Parameter arrays in the fixed order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return PolicyNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self):
        return np.concatenate([p.ravel() for p in self.params()])

    def with_flat(self, theta):
        """New network with parameters taken from a flat vector."""
        theta = np.asarray(theta, dtype=float)
        arrays, pos = [], 0
        for p in self.params():
            arrays.append(theta[pos:pos + p.size].reshape(p.shape))
            pos += p.size
        if pos != theta.size:
            raise ValueError(f"expected {pos} parameters, got {theta.size}")
        return PolicyNetwork(arrays[0::2], arrays[1::2])

    def forward(self, x):
        return self.forward_cache(x)[0]

    def forward_cache(self, x):
        a = np.atleast_2d(np.asarray(x, dtype=float))
        acts, pre = [a], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            a = np.tanh(z) if i == last else np.maximum(z, 0.0)
            acts.append(a)
        return a, (acts, pre)

    def backward(self, cache, grad_out):
        """Gradients of ``sum(grad_out * output)`` in ``params()`` order."""
        acts, pre = cache
        grad_z = np.asarray(grad_out, dtype=float).reshape(acts[-1].shape) * (1.0 - acts[-1] ** 2)
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ grad_z
            grads[2 * i + 1] = grad_z.sum(axis=0)
            if i:
                grad_z = (grad_z @ self.weights[i].T) * (pre[i - 1] > 0)
        return grads

    def jacobian(self, x):
        """d mu / d theta for a single input, shape (n_out, n_params)."""
        _, cache = self.forward_cache(x)
        n_out = self.sizes[-1]
        rows = []
        for k in range(n_out):
            unit = np.zeros((1, n_out))
            unit[0, k] = 1.0
            rows.append(np.concatenate([g.ravel() for g in self.backward(cache, unit)]))
        return np.array(rows)

    def to_dict(self):
        return {
            "sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            [np.asarray(w, dtype=float) for w in data["weights"]],
            [np.asarray(b, dtype=float) for b in data["biases"]],
        )


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
