"""Weight scaling with bias compensation.

Every weight is multiplied by ``epsilon`` and each neuron's bias is shifted
by ``delta_b`` to keep its output close to the unscaled one. Four ways of
choosing ``delta_b`` are supported: leave it at zero, the closed-form
Gaussian table, the delta-weighted empirical estimate, and retraining the
biases by gradient descent with the scaled weights frozen.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ShapeError, UndefinedRatioError
from .nn import (
    LOSSES,
    Activation,
    AdamState,
    BackpropRecord,
    DenseLayer,
    Network,
    activation_apply,
    adam_step,
    backward,
    forward,
    iterate_minibatches,
)
from .numerics import normal_hazard

# Width of the Gaussian standing in for the squared activation derivative.
SIGMOID_DERIV_WIDTH = 1.05
TANH_DERIV_WIDTH = 0.75

EPSILON_RANGE = (0.0, 2.0)


class BiasMode(str, enum.Enum):
    NONE = "none"
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"
    RETRAIN = "retrain"


@dataclass
class NeuronStats:
    """Mean and population standard deviation of pre-activations.

    Fields are scalars for a single neuron or arrays for a layer.
    """

    mu: np.ndarray | float
    sigma: np.ndarray | float
    count: int = 0


@dataclass
class ScalingPolicy:
    epsilon: float
    mode: BiasMode = BiasMode.NONE
    delta_b: list[np.ndarray] | None = field(default=None)

    def __post_init__(self):
        self.mode = BiasMode(self.mode)
        lo, hi = EPSILON_RANGE
        if not (lo <= self.epsilon <= hi):
            raise DomainError(f"epsilon must lie in [{lo}, {hi}], got {self.epsilon}")


def collect_stats(net: Network, inputs, chunk: int = 4096) -> list[NeuronStats]:
    """Per-layer pre-activation statistics of the unscaled network.

    Streams over ``inputs`` in chunks and merges partial moments
    (Chan et al. pairwise update) so large hidden layers never need the full
    ``P x M`` matrix at once.
    """
    u = np.asarray(inputs, dtype=float)
    if u.ndim != 2 or len(u) < 2:
        raise ValueError("statistics need at least two samples")
    n = 0
    means = [np.zeros(layer.n_out) for layer in net.layers]
    m2 = [np.zeros(layer.n_out) for layer in net.layers]
    for start in range(0, len(u), chunk):
        rec = forward(net, u[start:start + chunk])
        k = len(rec.pre[0])
        for i, s in enumerate(rec.pre):
            cm = s.mean(axis=0)
            cm2 = ((s - cm) ** 2).sum(axis=0)
            d = cm - means[i]
            tot = n + k
            means[i] = means[i] + d * (k / tot)
            m2[i] = m2[i] + cm2 + d * d * (n * k / tot)
        n += k
    return [NeuronStats(mu, np.sqrt(np.maximum(v / n, 0.0)), n) for mu, v in zip(means, m2)]


def _relu_shift(mu, sigma):
    # mu + sigma * hazard(-mu/sigma): mean of the normal truncated at zero
    return mu + sigma * normal_hazard(-mu / sigma)


def analytic_delta_b(kind, stats: NeuronStats, b, epsilon: float):
    """Closed-form bias adjustment assuming Gaussian pre-activations.

    Vectorized over neurons when ``stats`` and ``b`` are arrays.
    """
    kind = Activation(kind)
    mu = np.asarray(stats.mu, dtype=float)
    sigma = np.asarray(stats.sigma, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = 1.0 - epsilon
    if kind is Activation.LINEAR:
        out = scale * (mu - b)
    elif kind is Activation.STEP:
        out = (epsilon - 1.0) * b
    else:
        if np.any(sigma <= 0):
            raise DomainError(f"{kind.value} row needs sigma > 0")
        if kind is Activation.RELU:
            out = scale * (_relu_shift(mu, sigma) - b)
        else:
            k = SIGMOID_DERIV_WIDTH if kind is Activation.SIGMOID else TANH_DERIV_WIDTH
            B = k * k / (sigma * sigma + k * k)
            out = scale * (B * mu - b)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _analytic_layer(layer: DenseLayer, stats: NeuronStats, epsilon: float) -> np.ndarray:
    """Table row per neuron, with sigma -> 0 limits for constant neurons."""
    mu = np.broadcast_to(np.asarray(stats.mu, dtype=float), (layer.n_out,))
    sigma = np.broadcast_to(np.asarray(stats.sigma, dtype=float), (layer.n_out,))
    kind = layer.activation
    out = np.empty(layer.n_out)
    live = sigma > 0
    if live.any():
        out[live] = analytic_delta_b(kind, NeuronStats(mu[live], sigma[live]),
                                     layer.bias[live], epsilon)
    dead = ~live
    if dead.any():
        if kind is Activation.STEP:
            out[dead] = (epsilon - 1.0) * layer.bias[dead]
        else:
            centre = np.maximum(mu[dead], 0.0) if kind is Activation.RELU else mu[dead]
            out[dead] = (1.0 - epsilon) * (centre - layer.bias[dead])
    return out


def empirical_delta_b(s, delta, b, epsilon: float):
    """(1 - eps) * (sum(delta^2 s) / sum(delta^2) - b) over samples (axis 0)."""
    s = np.asarray(s, dtype=float)
    d2 = np.asarray(delta, dtype=float) ** 2
    if s.shape != d2.shape:
        raise ShapeError(f"pre-activations {s.shape} and deltas {d2.shape} differ")
    weight = d2.sum(axis=0)
    if np.any(weight <= 0):
        raise UndefinedRatioError("all deltas are zero for at least one neuron")
    out = (1.0 - epsilon) * ((d2 * s).sum(axis=0) / weight - np.asarray(b, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _empirical_layers(net: Network, inputs, targets, epsilon, stats, loss="bce", chunk=4096):
    """Delta-weighted adjustment for every layer, accumulated over chunks.

    Neurons whose deltas vanish on every sample fall back to the table row.
    """
    u = np.asarray(inputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    num = [np.zeros(layer.n_out) for layer in net.layers]
    den = [np.zeros(layer.n_out) for layer in net.layers]
    for start in range(0, len(u), chunk):
        rec = forward(net, u[start:start + chunk])
        backward(net, rec, t[start:start + chunk], loss, weight_grads=False)
        for i, (s, d) in enumerate(zip(rec.pre, rec.deltas)):
            d2 = d * d
            num[i] += (d2 * s).sum(axis=0)
            den[i] += d2.sum(axis=0)
    out = []
    for i, layer in enumerate(net.layers):
        db = np.empty(layer.n_out)
        ok = den[i] > 0
        db[ok] = (1.0 - epsilon) * (num[i][ok] / den[i][ok] - layer.bias[ok])
        if (~ok).any():
            if stats is None:
                raise UndefinedRatioError(f"layer {i} has neurons with all-zero deltas")
            fallback = _analytic_layer(layer, stats[i], epsilon)
            db[~ok] = fallback[~ok]
        out.append(db)
    return out


def scale_network(net: Network, epsilon: float, delta_b=None) -> Network:
    """Copy of ``net`` with weights ``eps*W`` and biases ``b + delta_b``."""
    layers = []
    for i, layer in enumerate(net.layers):
        db = 0.0 if delta_b is None else delta_b[i]
        layers.append(DenseLayer(epsilon * layer.weights, layer.bias + db, layer.activation))
    return Network(layers, net.seed)


def retrain_biases(net: Network, inputs, targets, epochs: int = 10, seed: int = 0,
                   batch_size: int = 128, lr: float = 0.001, loss: str = "bce") -> list[np.ndarray]:
    """Fit only the biases of ``net`` by Adam; weights stay frozen.

    ``net`` is not modified. Returns the bias vectors with the lowest full
    training loss seen, counting the starting point, so the result never
    has a higher training loss than the biases it started from.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    u = np.asarray(inputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    work = net.copy()
    first = work.layers[0]
    # the first layer sees fixed inputs and frozen weights: precompute u.W once
    z0 = u @ first.weights.T
    loss_fn = LOSSES[loss]

    def record_for(idx):
        ins, pre, post = [], [], []
        x_in = u[idx]
        s = z0[idx] + first.bias
        for j, layer in enumerate(work.layers):
            if j > 0:
                s = x_in @ layer.weights.T + layer.bias
            x = activation_apply(layer.activation, s)
            ins.append(x_in)
            pre.append(s)
            post.append(x)
            x_in = x
        return BackpropRecord(ins, pre, post)

    def full_loss():
        x = activation_apply(first.activation, z0 + first.bias)
        for layer in work.layers[1:]:
            x = activation_apply(layer.activation, x @ layer.weights.T + layer.bias)
        return loss_fn(x, t)

    biases = [layer.bias for layer in work.layers]
    best = full_loss()
    best_biases = [b.copy() for b in biases]
    state = AdamState.zeros_like(biases)
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(epochs):
        for idx in iterate_minibatches(len(u), batch_size, rng):
            rec = record_for(idx)
            grads = backward(work, rec, t[idx], loss, weight_grads=False)
            adam_step(biases, grads.biases, state, lr=lr)
        current = full_loss()
        if current < best:
            best = current
            best_biases = [b.copy() for b in biases]
    return best_biases


def apply_policy(net: Network, policy: ScalingPolicy, stats=None, train_inputs=None,
                 train_targets=None, retrain_epochs: int = 10, seed: int = 0,
                 loss: str = "bce") -> Network:
    """Return the scaled network and record the chosen ``delta_b`` on ``policy``.

    ``stats`` must come from :func:`collect_stats` on the unscaled ``net``;
    it is computed from ``train_inputs`` when omitted. Hidden-layer
    statistics are never refreshed after lower layers are scaled.
    """
    eps = policy.epsilon
    mode = policy.mode
    zeros = [np.zeros(layer.n_out) for layer in net.layers]
    if mode is BiasMode.NONE:
        delta_b = zeros
    elif mode is BiasMode.ANALYTIC:
        if stats is None:
            if train_inputs is None:
                raise ValueError("analytic mode needs stats or training inputs")
            stats = collect_stats(net, train_inputs)
        delta_b = [_analytic_layer(layer, st, eps) for layer, st in zip(net.layers, stats)]
    elif mode is BiasMode.EMPIRICAL:
        if train_inputs is None or train_targets is None:
            raise ValueError("empirical mode needs training data")
        if stats is None:
            stats = collect_stats(net, train_inputs)
        delta_b = _empirical_layers(net, train_inputs, train_targets, eps, stats, loss)
    else:
        if train_inputs is None or train_targets is None:
            raise ValueError("retrain mode needs training data")
        frozen = scale_network(net, eps)
        new_b = retrain_biases(frozen, train_inputs, train_targets, retrain_epochs, seed, loss=loss)
        delta_b = [nb - layer.bias for nb, layer in zip(new_b, net.layers)]
    policy.delta_b = delta_b
    return scale_network(net, eps, delta_b)

