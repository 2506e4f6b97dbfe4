"""Small dense-network core with hand-written gradients.

Row-major batches: an input batch has shape ``(batch, features)``. All
parameters of a :class:`Network` live in one flat float64 buffer and the
layers hold views into it, so the optimizer updates the whole network with
a handful of vectorized operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

__all__ = [
    "Dense",
    "BatchNorm",
    "LeakyReLU",
    "Sigmoid",
    "Tanh",
    "Network",
    "ForwardCache",
    "AdamState",
    "StaleCacheError",
    "forward",
    "backward",
    "adam_step",
    "least_squares_loss",
    "mae_loss",
]


class StaleCacheError(RuntimeError):
    pass


class Dense:
    kind = "dense"

    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.W: np.ndarray = np.zeros((n_out, n_in))
        self.b: np.ndarray = np.zeros(n_out)

    def param_shapes(self):
        return [(self.n_out, self.n_in), (self.n_out,)]

    def bind(self, params, grads):
        self.W, self.b = params
        self.dW, self.db = grads

    def init(self, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (self.n_in + self.n_out))
        self.W[...] = rng.uniform(-limit, limit, size=self.W.shape)
        self.b[...] = 0.0

    def forward(self, x, train):
        return x @ self.W.T + self.b, x

    def backward(self, x, g):
        self.dW += g.T @ x
        self.db += g.sum(axis=0)
        return g @ self.W


class BatchNorm:
    """Per-feature batch normalization; batch statistics in training, running ones otherwise."""

    kind = "batchnorm"

    def __init__(self, n: int, eps: float = 1e-5, momentum: float = 0.9):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.n_in = self.n_out = n
        self.eps, self.momentum = eps, momentum
        self.gamma = np.ones(n)
        self.beta = np.zeros(n)
        self.running_mean = np.zeros(n)
        self.running_var = np.ones(n)

    def param_shapes(self):
        return [(self.n_out,), (self.n_out,)]

    def bind(self, params, grads):
        self.gamma, self.beta = params
        self.dgamma, self.dbeta = grads

    def init(self, rng):
        self.gamma[...] = 1.0
        self.beta[...] = 0.0
        self.running_mean[...] = 0.0
        self.running_var[...] = 1.0

    def forward(self, x, train):
        if not train:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            return self.gamma * xhat + self.beta, None
        n = x.shape[0]
        mu = x.sum(axis=0) / n
        xc = x - mu
        var = (xc * xc).sum(axis=0) / n
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = xc * inv
        m = self.momentum
        self.running_mean *= m
        self.running_mean += (1.0 - m) * mu
        self.running_var *= m
        self.running_var += (1.0 - m) * var * (n / (n - 1))
        return self.gamma * xhat + self.beta, (xhat, inv)

    def backward(self, cache, g):
        if cache is None:
            raise RuntimeError("backward through BatchNorm requires a training-mode forward")
        xhat, inv = cache
        self.dgamma += (g * xhat).sum(axis=0)
        self.dbeta += g.sum(axis=0)
        gx = g * self.gamma
        n = g.shape[0]
        return inv * (gx - gx.sum(axis=0) / n - xhat * ((gx * xhat).sum(axis=0) / n))


class _Activation:
    n_in = n_out = None

    def param_shapes(self):
        return []

    def bind(self, params, grads):
        pass

    def init(self, rng):
        pass


class LeakyReLU(_Activation):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x, train):
        scale = np.where(x > 0, 1.0, self.slope)
        return x * scale, scale

    def backward(self, scale, g):
        return g * scale


class Sigmoid(_Activation):
    kind = "sigmoid"

    def forward(self, x, train):
        y = 0.5 * (1.0 + np.tanh(0.5 * x))
        return y, y

    def backward(self, y, g):
        return g * y * (1.0 - y)


class Tanh(_Activation):
    kind = "tanh"

    def forward(self, x, train):
        y = np.tanh(x)
        return y, y

    def backward(self, y, g):
        return g * (1.0 - y * y)


_LAYER_TYPES = {cls.kind: cls for cls in (Dense, BatchNorm, LeakyReLU, Sigmoid, Tanh)}


@dataclass
class ForwardCache:
    entries: list
    version: int
    batch_shape: tuple


class Network:
    """Sequential stack of layers sharing one flat parameter buffer."""

    def __init__(self, layers: Sequence[Any], rng: np.random.Generator | None = None):
        self.layers = list(layers)
        widths = [l.n_in for l in self.layers if l.n_in is not None]
        if not widths:
            raise ValueError("network needs at least one parameterized layer")
        self.n_in = widths[0]
        self.n_out = [l.n_out for l in self.layers if l.n_out is not None][-1]
        shapes = [s for l in self.layers for s in l.param_shapes()]
        sizes = [int(np.prod(s)) for s in shapes]
        self.params = np.zeros(sum(sizes))
        self.grads = np.zeros_like(self.params)
        offset = 0
        for layer in self.layers:
            p_views, g_views = [], []
            for shape in layer.param_shapes():
                size = int(np.prod(shape))
                p_views.append(self.params[offset : offset + size].reshape(shape))
                g_views.append(self.grads[offset : offset + size].reshape(shape))
                offset += size
            layer.bind(p_views, g_views)
        self.version = 0
        self._has_bn = any(isinstance(l, BatchNorm) for l in self.layers)
        for layer in self.layers:
            # BatchNorm starts as the identity whether or not weights are randomized
            if rng is not None or isinstance(layer, BatchNorm):
                layer.init(rng)

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def has_batchnorm(self) -> bool:
        return self._has_bn

    def forward(self, x: np.ndarray, train: bool = True) -> tuple[np.ndarray, ForwardCache]:
        return forward(self, x, train)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode output without building a backward cache."""
        h = np.asarray(x, dtype=float)
        if h.ndim == 1:
            return self.predict(h[None, :])[0]
        for layer in self.layers:
            h, _ = layer.forward(h, False)
        return h

    def apply_adam(self, state: "AdamState") -> None:
        """Adam update from ``self.grads``; invalidates outstanding forward caches."""
        adam_step(state, self.params, self.grads)
        self.version += 1

    def buffers(self) -> list[np.ndarray]:
        return [
            a for l in self.layers if isinstance(l, BatchNorm) for a in (l.running_mean, l.running_var)
        ]

    def copy(self) -> "Network":
        clone = Network.from_dict(self.to_dict())
        clone.version = self.version
        return clone

    def to_dict(self) -> dict:
        spec = []
        for layer in self.layers:
            entry: dict[str, Any] = {"kind": layer.kind}
            if isinstance(layer, Dense):
                entry.update(n_in=layer.n_in, n_out=layer.n_out)
            elif isinstance(layer, BatchNorm):
                entry.update(
                    n=layer.n_out,
                    eps=layer.eps,
                    momentum=layer.momentum,
                    running_mean=layer.running_mean.tolist(),
                    running_var=layer.running_var.tolist(),
                )
            elif isinstance(layer, LeakyReLU):
                entry.update(slope=layer.slope)
            spec.append(entry)
        return {"layers": spec, "params": self.params.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        layers = []
        for entry in data["layers"]:
            kind = entry["kind"]
            if kind == "dense":
                layers.append(Dense(entry["n_in"], entry["n_out"]))
            elif kind == "batchnorm":
                layers.append(BatchNorm(entry["n"], entry["eps"], entry["momentum"]))
            elif kind == "leaky_relu":
                layers.append(LeakyReLU(entry["slope"]))
            elif kind in _LAYER_TYPES:
                layers.append(_LAYER_TYPES[kind]())
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
        net = cls(layers)
        params = np.asarray(data["params"], dtype=float)
        if params.shape != net.params.shape:
            raise ValueError("parameter count does not match the layer header")
        net.params[...] = params
        for layer, entry in zip(net.layers, data["layers"]):
            if isinstance(layer, BatchNorm):
                layer.running_mean[...] = entry["running_mean"]
                layer.running_var[...] = entry["running_var"]
        return net

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def forward(network: Network, batch: np.ndarray, train: bool = True) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != network.n_in:
        raise ValueError(f"expected batch of shape (n, {network.n_in}), got {x.shape}")
    if not np.isfinite(x.sum()):
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
    if train and x.shape[0] < 2 and network.has_batchnorm:
        raise ValueError("batch normalization in training mode needs at least 2 rows")
    entries = []
    h = x
    for layer in network.layers:
        h, cache = layer.forward(h, train)
        entries.append(cache)
    return h, ForwardCache(entries, network.version, x.shape)


def backward(
    network: Network, cache: ForwardCache, grad_output: np.ndarray, accumulate: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(parameter gradients, input gradient)`` for the cached forward pass.

    Gradients land in ``network.grads`` (a flat array aligned with
    ``network.params``); with ``accumulate`` they are added to what is there.
    """
    if cache.version != network.version:
        raise StaleCacheError("parameters changed since this forward pass")
    if not accumulate:
        network.grads[...] = 0.0
    g = np.asarray(grad_output, dtype=float)
    for layer, entry in zip(reversed(network.layers), reversed(cache.entries)):
        g = layer.backward(entry, g)
    return network.grads, g


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def copy(self) -> "AdamState":
        return AdamState(
            self.lr, self.beta1, self.beta2, self.eps, self.t,
            None if self.m is None else self.m.copy(),
            None if self.v is None else self.v.copy(),
        )


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Bias-corrected Adam update of ``params`` in place."""
    if params.shape != grads.shape:
        raise ValueError("parameter and gradient shapes differ")
    if not np.all(np.isfinite(grads)):
        raise FloatingPointError("non-finite gradient")
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    elif state.m.shape != params.shape:
        raise ValueError("optimizer state does not match parameters")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def least_squares_loss(scores, targets) -> tuple[float, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("empty batch")
    t = np.asarray(targets, dtype=float)
    if t.size != 1 and t.shape != s.shape:
        raise ValueError(f"scores {s.shape} and targets {t.shape} differ")
    diff = s - t
    return float((diff * diff).sum() / s.size), (2.0 / s.size) * diff


def mae_loss(inputs, outputs) -> tuple[float, np.ndarray]:
    """Mean absolute error and its (sub)gradient with respect to ``outputs``."""
    a = np.asarray(inputs, dtype=float)
    b = np.asarray(outputs, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    diff = b - a
    return float(np.mean(np.abs(diff))), np.sign(diff) / a.size
