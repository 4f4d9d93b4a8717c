"""Sigmoid multilayer perceptron trained by per-sample gradient descent with
momentum.

Parameters live in a flat vector per network. The kernels take a trailing
"lane" axis so that many independent networks (for instance the folds of a
leave-one-out run) train in a single call; lanes never interact, so a
network's result does not depend on which batch it was trained in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

SQUARED, CROSS_ENTROPY = 0, 1
LOSSES = {"squared": SQUARED, "cross_entropy": CROSS_ENTROPY}


@dataclass(frozen=True)
class Layout:
    sizes: np.ndarray
    w_off: np.ndarray
    b_off: np.ndarray
    a_off: np.ndarray
    n_params: int

    @classmethod
    def build(cls, sizes) -> "Layout":
        sizes = np.asarray(sizes, dtype=np.int64)
        w_off, b_off, p = [], [], 0
        for l in range(len(sizes) - 1):
            w_off.append(p)
            p += int(sizes[l] * sizes[l + 1])
            b_off.append(p)
            p += int(sizes[l + 1])
        a_off = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        return cls(sizes, np.array(w_off, dtype=np.int64), np.array(b_off, dtype=np.int64), a_off, p)

    @property
    def n_units(self) -> int:
        return int(self.a_off[-1] + self.sizes[-1])

    def weights(self, params, layer):
        """View of layer ``layer``'s ``(n_in, n_out)`` weight matrix."""
        n_in, n_out = self.sizes[layer], self.sizes[layer + 1]
        o = self.w_off[layer]
        return params[o:o + n_in * n_out].reshape(n_in, n_out)

    def biases(self, params, layer):
        o = self.b_off[layer]
        return params[o:o + self.sizes[layer + 1]]


def init_params(layout: Layout, rng: np.random.Generator) -> np.ndarray:
    """Uniform init in ``±4·sqrt(6 / (fan_in + fan_out))`` for weights and biases."""
    params = np.empty(layout.n_params)
    for l in range(len(layout.sizes) - 1):
        fi, fo = int(layout.sizes[l]), int(layout.sizes[l + 1])
        r = 4.0 * np.sqrt(6.0 / (fi + fo))
        layout.weights(params, l)[:] = rng.uniform(-r, r, size=(fi, fo))
        layout.biases(params, l)[:] = rng.uniform(-r, r, size=fo)
    return params


@njit(cache=True, nogil=True)
def _forward(params, sizes, w_off, b_off, a_off, acts):
    n_layers = sizes.shape[0] - 1
    F = params.shape[1]
    for l in range(n_layers):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        ai = a_off[l]
        ao = a_off[l + 1]
        wo = w_off[l]
        bo = b_off[l]
        for j in range(n_out):
            for f in range(F):
                acts[ao + j, f] = params[bo + j, f]
            for i in range(n_in):
                for f in range(F):
                    acts[ao + j, f] += acts[ai + i, f] * params[wo + i * n_out + j, f]
            for f in range(F):
                acts[ao + j, f] = 1.0 / (1.0 + np.exp(-acts[ao + j, f]))


@njit(cache=True, nogil=True)
def _backward(params, sizes, w_off, a_off, acts, target, deltas, loss):
    n_layers = sizes.shape[0] - 1
    F = params.shape[1]
    ao = a_off[n_layers]
    for j in range(sizes[n_layers]):
        for f in range(F):
            a = acts[ao + j, f]
            if loss == 0:
                deltas[ao + j, f] = (a - target[j, f]) * a * (1.0 - a)
            else:
                deltas[ao + j, f] = a - target[j, f]
    for l in range(n_layers - 1, 0, -1):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        ai = a_off[l]
        ao = a_off[l + 1]
        wo = w_off[l]
        for i in range(n_in):
            for f in range(F):
                deltas[ai + i, f] = 0.0
            for j in range(n_out):
                for f in range(F):
                    deltas[ai + i, f] += params[wo + i * n_out + j, f] * deltas[ao + j, f]
            for f in range(F):
                a = acts[ai + i, f]
                deltas[ai + i, f] *= a * (1.0 - a)


@njit(cache=True, nogil=True)
def _load(X, Y, rows, acts, target):
    d = X.shape[1]
    k = Y.shape[1]
    for f in range(rows.shape[0]):
        r = rows[f]
        for i in range(d):
            acts[i, f] = X[r, i, f]
        for j in range(k):
            target[j, f] = Y[r, j, f]


@njit(cache=True, nogil=True)
def train_lanes(params, X, Y, order, sizes, w_off, b_off, a_off, lr, momentum, loss):
    """Train every lane in place.

    params: (P, F); X: (n, d, F); Y: (n, k, F) one-hot; order: (epochs, n, F)
    row indices visited per step.
    """
    n_layers = sizes.shape[0] - 1
    F = params.shape[1]
    vel = np.zeros_like(params)
    acts = np.zeros((a_off[n_layers] + sizes[n_layers], F))
    deltas = np.zeros_like(acts)
    target = np.zeros((sizes[n_layers], F))
    for e in range(order.shape[0]):
        for s in range(order.shape[1]):
            _load(X, Y, order[e, s], acts, target)
            _forward(params, sizes, w_off, b_off, a_off, acts)
            _backward(params, sizes, w_off, a_off, acts, target, deltas, loss)
            for l in range(n_layers):
                n_in = sizes[l]
                n_out = sizes[l + 1]
                ai = a_off[l]
                ao = a_off[l + 1]
                wo = w_off[l]
                bo = b_off[l]
                for i in range(n_in):
                    for j in range(n_out):
                        p = wo + i * n_out + j
                        for f in range(F):
                            vel[p, f] = momentum * vel[p, f] - lr * deltas[ao + j, f] * acts[ai + i, f]
                            params[p, f] += vel[p, f]
                for j in range(n_out):
                    p = bo + j
                    for f in range(F):
                        vel[p, f] = momentum * vel[p, f] - lr * deltas[ao + j, f]
                        params[p, f] += vel[p, f]
    return params


@njit(cache=True, nogil=True)
def summed_gradient(params, X, Y, sizes, w_off, b_off, a_off, loss):
    """Gradient of the loss summed over all rows, for a single network.

    params: (P,); X: (n, d); Y: (n, k).
    """
    n_layers = sizes.shape[0] - 1
    p2 = params.reshape(params.shape[0], 1)
    grad = np.zeros(params.shape[0])
    acts = np.zeros((a_off[n_layers] + sizes[n_layers], 1))
    deltas = np.zeros_like(acts)
    target = np.zeros((sizes[n_layers], 1))
    for r in range(X.shape[0]):
        for i in range(X.shape[1]):
            acts[i, 0] = X[r, i]
        for j in range(Y.shape[1]):
            target[j, 0] = Y[r, j]
        _forward(p2, sizes, w_off, b_off, a_off, acts)
        _backward(p2, sizes, w_off, a_off, acts, target, deltas, loss)
        for l in range(n_layers):
            n_in = sizes[l]
            n_out = sizes[l + 1]
            ai = a_off[l]
            ao = a_off[l + 1]
            for i in range(n_in):
                for j in range(n_out):
                    grad[w_off[l] + i * n_out + j] += deltas[ao + j, 0] * acts[ai + i, 0]
            for j in range(n_out):
                grad[b_off[l] + j] += deltas[ao + j, 0]
    return grad


@njit(cache=True, nogil=True)
def predict_outputs(params, X, sizes, w_off, b_off, a_off):
    """Output activations ``(n, k)`` of one network for the rows of ``X``."""
    n_layers = sizes.shape[0] - 1
    k = sizes[n_layers]
    p2 = params.reshape(params.shape[0], 1)
    acts = np.zeros((a_off[n_layers] + k, 1))
    out = np.empty((X.shape[0], k))
    for r in range(X.shape[0]):
        for i in range(X.shape[1]):
            acts[i, 0] = X[r, i]
        _forward(p2, sizes, w_off, b_off, a_off, acts)
        for j in range(k):
            out[r, j] = acts[a_off[n_layers] + j, 0]
    return out


def loss_numpy(layout: Layout, params, X, Y, loss: int = SQUARED, dtype=np.float64) -> float:
    """Plain numpy forward pass and summed loss; independent of the kernels.

    A wider ``dtype`` (``np.longdouble``) lowers rounding noise when the loss
    feeds finite differences.
    """
    params = np.asarray(params, dtype=dtype)
    a = np.asarray(X, dtype=dtype)
    Y = np.asarray(Y, dtype=dtype)
    for l in range(len(layout.sizes) - 1):
        a = 1 / (1 + np.exp(-(a @ layout.weights(params, l) + layout.biases(params, l))))
    if loss == SQUARED:
        return 0.5 * np.sum((a - Y) ** 2)
    return -np.sum(Y * np.log(a) + (1 - Y) * np.log1p(-a))


def train_networks(layout: Layout, params, X, Y, order, lr, momentum, loss=SQUARED):
    """Convenience wrapper around :func:`train_lanes` with contiguous copies."""
    out = np.ascontiguousarray(params, dtype=float).copy()
    return train_lanes(out, np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(Y, dtype=float),
                       np.ascontiguousarray(order, dtype=np.int64), layout.sizes, layout.w_off,
                       layout.b_off, layout.a_off, float(lr), float(momentum), int(loss))
