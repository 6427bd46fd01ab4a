from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .layers import LSTM, layer_from_spec


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class NeuralModel:
    """A stack of dense/LSTM layers closed by a softmax over ``class_values``.

    ``norm`` holds the (lo, hi) feature range seen at training time; inputs
    are mapped affinely from that range onto [-1, 1] and clipped.
    """
    layers: list
    params: list
    input_shape: tuple
    class_values: tuple
    task: str = "generic"
    norm: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.class_values = tuple(int(c) for c in self.class_values)
        prev = self.input_shape[-1] if isinstance(self.layers[0], LSTM) else int(
            np.prod(self.input_shape))
        if isinstance(self.layers[0], LSTM) and len(self.input_shape) != 2:
            raise DimensionError("LSTM models take (steps, features) inputs")
        for layer in self.layers:
            if layer.in_dim != prev:
                raise DimensionError(
                    f"layer {layer.spec()} expects {layer.in_dim} inputs, previous emits {prev}")
            prev = layer.out_dim
        if prev != len(self.class_values):
            raise DimensionError(f"output width {prev} != {len(self.class_values)} classes")

    @property
    def n_classes(self):
        return len(self.class_values)

    @property
    def n_params(self):
        return sum(a.size for p in self.params for a in p.values())

    def architecture(self):
        return [l.spec() for l in self.layers] + [{"kind": "softmax"}]

    # -- inputs
    def normalize(self, x):
        if self.norm is None:
            return x
        lo, hi = self.norm
        span = hi - lo if hi > lo else 1.0
        return np.clip((x - lo) * (2.0 / span) - 1.0, -1.0, 1.0)

    def _prepare(self, x):
        x = np.asarray(x, dtype=np.float64)
        shape = self.input_shape
        if x.shape == shape or (x.ndim == 1 and x.size == int(np.prod(shape))):
            x = x.reshape((1,) + shape)
        if x.shape[1:] != shape:
            if int(np.prod(x.shape[1:])) == int(np.prod(shape)):
                x = x.reshape((x.shape[0],) + shape)
            else:
                raise DimensionError(f"input shape {x.shape[1:]} does not match {shape}")
        x = self.normalize(x)
        if not isinstance(self.layers[0], LSTM):
            x = x.reshape(x.shape[0], -1)
        return x

    # -- passes
    def logits(self, x, keep_cache=False):
        h = self._prepare(x)
        caches = []
        for layer, p in zip(self.layers, self.params):
            h, cache = layer.forward(p, h)
            caches.append(cache)
        return (h, caches) if keep_cache else h

    def forward(self, x):
        """Class probabilities, one row per input."""
        return softmax(self.logits(x))

    def predict_index(self, x):
        """Argmax class position; ties resolve to the lowest position."""
        return np.argmax(self.logits(x), axis=1)

    def predict(self, x):
        return np.asarray(self.class_values)[self.predict_index(x)]

    def loss_and_grads(self, x, targets, weights=None):
        """Weighted mean cross-entropy and its gradient for every parameter.

        ``targets`` are class positions (0..n_classes-1).
        """
        z, caches = self.logits(x, keep_cache=True)
        loss, dz = cross_entropy(z, targets, weights)
        grads = [None] * len(self.layers)
        dh = dz
        for k in reversed(range(len(self.layers))):
            dh, grads[k] = self.layers[k].backward(self.params[k], dh, caches[k])
        return loss, grads

    def loss(self, x, targets, weights=None):
        return cross_entropy(self.logits(x), targets, weights)[0]

    def copy_params(self):
        return [{k: v.copy() for k, v in p.items()} for p in self.params]


def cross_entropy(z, targets, weights=None):
    targets = np.asarray(targets, dtype=np.int64)
    n = z.shape[0]
    zs = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(zs).sum(axis=1))
    nll = logsum - zs[np.arange(n), targets]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)[targets]
    total = w.sum()
    loss = float((w * nll).sum() / total)
    dz = np.exp(zs - logsum[:, None])
    dz[np.arange(n), targets] -= 1.0
    dz *= (w / total)[:, None]
    return loss, dz


def build_model(arch, input_shape, class_values, seed=0, task="generic", norm=None):
    layers = [layer_from_spec(s) for s in arch if s["kind"] != "softmax"]
    rng = np.random.default_rng(seed)
    params = [l.init(rng) for l in layers]
    return NeuralModel(layers, params, input_shape, class_values, task, norm)


def lstm_arch(steps_features=(3, 120), n_classes=10, lstm_hidden=128, dense_hidden=64):
    return [{"kind": "lstm", "in": steps_features[1], "hidden": lstm_hidden},
            {"kind": "dense", "in": lstm_hidden, "out": dense_hidden, "activation": "relu"},
            {"kind": "dense", "in": dense_hidden, "out": n_classes, "activation": "none"},
            {"kind": "softmax"}]


def dense_arch(n_in, n_classes, hidden=(64, 64, 32)):
    arch, prev = [], n_in
    for h in hidden:
        arch.append({"kind": "dense", "in": prev, "out": h, "activation": "relu"})
        prev = h
    arch.append({"kind": "dense", "in": prev, "out": n_classes, "activation": "none"})
    arch.append({"kind": "softmax"})
    return arch


PLAIN_DNN_HIDDEN = (512, 128, 64)
SWITCH_DNN_HIDDEN = (64, 64, 32)
