"""Fully connected network: ReLU hidden layers, softmax output, cross-entropy
loss, trained with plain mini-batch SGD."""

from __future__ import annotations

import numpy as np


def glorot_init(sizes, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, X):
    """Return the list of layer activations, input first, class probabilities last."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        h = softmax(z) if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(params, X, y):
    """Mean cross-entropy and its gradient with respect to every (W, b)."""
    n = len(y)
    acts = forward(params, X)
    probs = acts[-1]
    loss = -np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None)))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i:
            delta = (delta @ W.T) * (acts[i] > 0)
    return float(loss), grads


class NeuralNet:
    def __init__(self, hidden_layers=(32,), epochs=200, learning_rate=0.05, batch_size=32):
        self.hidden_layers = tuple(hidden_layers)
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.params = None
        self.epochs_run = 0

    def fit(self, X, y, n_classes: int, rng):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        sizes = [X.shape[1], *self.hidden_layers, n_classes]
        params = glorot_init(sizes, rng)
        n = len(y)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for lo in range(0, n, self.batch_size):
                batch = order[lo:lo + self.batch_size]
                _, grads = loss_and_grads(params, X[batch], y[batch])
                params = [
                    (W - self.learning_rate * gW, b - self.learning_rate * gb)
                    for (W, b), (gW, gb) in zip(params, grads)
                ]
        self.params = params
        self.epochs_run = self.epochs
        return self

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.params, np.asarray(X, dtype=float))[-1]

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def get_params(self) -> dict:
        return {"layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.params]}

    @classmethod
    def from_params(cls, params: dict) -> "NeuralNet":
        net = cls()
        net.params = []
        for layer in params["layers"]:
            b = np.array(layer["b"], dtype=float)
            W = np.array(layer["W"], dtype=float).reshape(-1, b.size)
            net.params.append((W, b))
        return net
