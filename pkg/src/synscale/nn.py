"""Dense feed-forward networks in plain numpy.

Layers store weights as ``(n_out, n_in)`` so a batch of inputs ``U`` of
shape ``(P, n_in)`` maps to pre-activations ``S = U @ W.T + b``.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ShapeError, UnsupportedForTraining

BCE_CLAMP = 1e-12
MODEL_FORMAT_VERSION = 1


class Activation(str, enum.Enum):
    LINEAR = "linear"
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    STEP = "step"


def _sigmoid(s):
    # split by sign so exp never overflows
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def activation_apply(kind, s):
    kind = Activation(kind)
    s = np.asarray(s, dtype=float)
    if kind is Activation.LINEAR:
        out = s.copy()
    elif kind is Activation.RELU:
        out = np.maximum(s, 0.0)
    elif kind is Activation.SIGMOID:
        out = _sigmoid(s)
    elif kind is Activation.TANH:
        out = np.tanh(s)
    else:
        out = (s >= 0).astype(float)
    return out[()] if out.ndim == 0 else out


def activation_derivative(kind, s):
    """df/ds. ReLU uses 0 at the kink; Step is 0 everywhere."""
    kind = Activation(kind)
    s = np.asarray(s, dtype=float)
    if kind is Activation.LINEAR:
        out = np.ones_like(s)
    elif kind is Activation.RELU:
        out = (s > 0).astype(float)
    elif kind is Activation.SIGMOID:
        f = _sigmoid(s)
        out = f * (1.0 - f)
    elif kind is Activation.TANH:
        out = 1.0 / np.cosh(np.clip(s, -350.0, 350.0)) ** 2
    else:
        out = np.zeros_like(s)
    return out[()] if out.ndim == 0 else out


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float, ndmin=2)
        self.bias = np.array(self.bias, dtype=float, ndmin=1)
        self.activation = Activation(self.activation)
        m, n = self.weights.shape
        if m < 1 or n < 1:
            raise ShapeError(f"layer must have at least one input and output, got {m}x{n}")
        if self.bias.shape != (m,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match {m} outputs")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class Network:
    layers: list[DenseLayer]
    seed: int | None = None

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.n_out != b.n_in:
                raise ShapeError(
                    f"layer {i} has {a.n_out} outputs but layer {i + 1} expects {b.n_in} inputs"
                )

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def trainable(self) -> bool:
        return all(layer.activation is not Activation.STEP for layer in self.layers)

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers], self.seed)


def init_network(sizes, activations, seed: int) -> Network:
    """Glorot-uniform weights, zero biases.

    ``sizes`` lists the layer widths including the input, e.g. ``(784, 10)``.
    """
    if len(activations) != len(sizes) - 1:
        raise ShapeError("need one activation per layer")
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        layers.append(DenseLayer(w, np.zeros(n_out), act))
    return Network(layers, seed)


@dataclass
class BackpropRecord:
    """Per-layer tensors from one pass over a batch.

    ``inputs[i]`` is the input to layer i, ``pre[i]`` its pre-activations,
    ``post[i]`` its outputs. ``deltas[i]`` holds per-sample dl_p/ds (not
    divided by the batch size) once :func:`backward` has run.
    """

    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    deltas: list[np.ndarray] | None = None

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


@dataclass
class Gradients:
    weights: list[np.ndarray | None]
    biases: list[np.ndarray]


def _as_batch(net: Network, inputs) -> np.ndarray:
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.ndim != 2 or u.shape[1] != net.n_in:
        raise ShapeError(f"inputs of shape {u.shape} do not match network input size {net.n_in}")
    return u


def forward(net: Network, inputs) -> BackpropRecord:
    u = _as_batch(net, inputs)
    ins, pre, post = [], [], []
    for layer in net.layers:
        s = u @ layer.weights.T + layer.bias
        x = activation_apply(layer.activation, s)
        ins.append(u)
        pre.append(s)
        post.append(x)
        u = x
    return BackpropRecord(ins, pre, post)


def predict_outputs(net: Network, inputs, chunk: int = 10000) -> np.ndarray:
    u = _as_batch(net, inputs)
    parts = []
    for start in range(0, len(u), chunk):
        x = u[start:start + chunk]
        for layer in net.layers:
            x = activation_apply(layer.activation, x @ layer.weights.T + layer.bias)
        parts.append(x)
    return np.concatenate(parts)


def loss_bce(outputs, targets) -> float:
    """Mean over samples of the summed per-class binary cross-entropy."""
    x = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if x.shape != t.shape:
        raise ShapeError(f"outputs {x.shape} and targets {t.shape} differ")
    x = np.clip(x, BCE_CLAMP, 1.0 - BCE_CLAMP)
    per_sample = -(t * np.log(x) + (1.0 - t) * np.log1p(-x))
    if per_sample.ndim == 1:
        per_sample = per_sample[None, :]
    return float(per_sample.sum(axis=1).mean())


def loss_mse(outputs, targets) -> float:
    """Mean over samples of 0.5 * ||x - t||^2."""
    d = np.asarray(outputs, dtype=float) - np.asarray(targets, dtype=float)
    if d.ndim == 1:
        d = d[None, :]
    return float(0.5 * (d * d).sum(axis=1).mean())


LOSSES = {"bce": loss_bce, "mse": loss_mse}


def _output_delta(layer: DenseLayer, s, x, t, loss: str) -> np.ndarray:
    if loss == "mse":
        return (x - t) * activation_derivative(layer.activation, s)
    if loss != "bce":
        raise ValueError(f"unknown loss {loss!r}")
    if layer.activation is Activation.SIGMOID:
        return x - t
    xc = np.clip(x, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return (xc - t) / (xc * (1.0 - xc)) * activation_derivative(layer.activation, s)


def backward(net: Network, record: BackpropRecord, targets, loss: str = "bce",
             weight_grads: bool = True) -> Gradients:
    """Reverse-mode gradients of the mean loss; fills ``record.deltas``."""
    if not net.trainable:
        raise UnsupportedForTraining("step layers have zero derivative almost everywhere")
    t = np.asarray(targets, dtype=float)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape != record.output.shape:
        raise ShapeError(f"targets {t.shape} do not match outputs {record.output.shape}")
    n = len(t)
    layers = net.layers
    deltas = [None] * len(layers)
    delta = _output_delta(layers[-1], record.pre[-1], record.post[-1], t, loss)
    for i in range(len(layers) - 1, -1, -1):
        deltas[i] = delta
        if i > 0:
            delta = (delta @ layers[i].weights) * activation_derivative(
                layers[i - 1].activation, record.pre[i - 1])
    record.deltas = deltas
    gw = [d.T @ u / n if weight_grads else None for d, u in zip(deltas, record.inputs)]
    gb = [d.mean(axis=0) for d in deltas]
    return Gradients(gw, gb)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update, applied to ``params`` in place. Returns ``(params, state)``."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def accuracy(net: Network, inputs, targets) -> float:
    """Fraction of rows whose output argmax equals the target argmax."""
    out = predict_outputs(net, inputs)
    t = np.asarray(targets)
    return float(np.mean(out.argmax(axis=1) == t.argmax(axis=1)))


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float
    seconds: float
    extra: dict = field(default_factory=dict)


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(net: Network, inputs, targets, epochs: int = 25, batch_size: int = 128,
          lr: float = 0.001, seed: int = 0, loss: str = "bce", callback=None) -> list[EpochLog]:
    """Mini-batch Adam on all weights and biases, in place."""
    if not net.trainable:
        raise UnsupportedForTraining("cannot train a network with step layers")
    u = _as_batch(net, inputs)
    t = np.asarray(targets, dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    params = [p for layer in net.layers for p in (layer.weights, layer.bias)]
    state = AdamState.zeros_like(params)
    history = []
    for epoch in range(1, epochs + 1):
        start = time.perf_counter()
        for idx in iterate_minibatches(len(u), batch_size, rng):
            rec = forward(net, u[idx])
            g = backward(net, rec, t[idx], loss)
            grads = [x for pair in zip(g.weights, g.biases) for x in pair]
            adam_step(params, grads, state, lr=lr)
        out = predict_outputs(net, u)
        log = EpochLog(epoch, LOSSES[loss](out, t),
                       float(np.mean(out.argmax(1) == t.argmax(1))),
                       time.perf_counter() - start)
        history.append(log)
        if callback is not None:
            callback(log)
    return history


def save_network(net: Network, path) -> Path:
    """Write ``net`` as an ``.npz`` archive (see README for the layout)."""
    path = Path(path)
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "seed": net.seed,
        "layers": [
            {"n_in": layer.n_in, "n_out": layer.n_out, "activation": layer.activation.value}
            for layer in net.layers
        ],
    }
    arrays = {"header": np.array(json.dumps(header))}
    for i, layer in enumerate(net.layers):
        arrays[f"W{i}"] = np.ascontiguousarray(layer.weights, dtype="<f8")
        arrays[f"b{i}"] = np.ascontiguousarray(layer.bias, dtype="<f8")
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_network(path) -> Network:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {header.get('format_version')}")
        layers = []
        for i, spec in enumerate(header["layers"]):
            w, b = data[f"W{i}"], data[f"b{i}"]
            if w.shape != (spec["n_out"], spec["n_in"]):
                raise ShapeError(f"layer {i} weights have shape {w.shape}, header says "
                                 f"{(spec['n_out'], spec['n_in'])}")
            layers.append(DenseLayer(w, b, spec["activation"]))
    return Network(layers, header.get("seed"))
