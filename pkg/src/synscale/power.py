"""Crossbar mapping and the synaptic power proxy.

Weights and biases are realized as conductance pairs with at most one
device of each pair conducting, so a parameter's magnitude equals the sum
of its two conductances. Power figures carry no units; only ratios are used.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateNetworkError, DomainError, ShapeError
from .nn import Activation, DenseLayer, Network, activation_apply


class ConductancePair(NamedTuple):
    g_plus: float
    g_minus: float


def weight_to_conductances(w):
    """Split a weight (or array of weights) into non-negative (G+, G-)."""
    w = np.asarray(w, dtype=float)
    g_plus = np.where(w >= 0, w, 0.0)
    g_minus = np.where(w < 0, -w, 0.0)
    if w.ndim == 0:
        return ConductancePair(float(g_plus), float(g_minus))
    return ConductancePair(g_plus, g_minus)


@dataclass
class CrossbarLayer:
    """Conductance arrays of shape ``(n_out, n_in + 1)``; the last column is the bias row."""

    g_plus: np.ndarray
    g_minus: np.ndarray
    activation: Activation

    @classmethod
    def from_layer(cls, layer: DenseLayer) -> "CrossbarLayer":
        augmented = np.column_stack([layer.weights, layer.bias])
        g_plus, g_minus = weight_to_conductances(augmented)
        return cls(g_plus, g_minus, layer.activation)

    @property
    def n_in(self) -> int:
        return self.g_plus.shape[1] - 1


def crossbar_forward(layer: CrossbarLayer, u) -> np.ndarray:
    """Output voltages of a crossbar; ``u`` may be one input or a batch."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[1] != layer.n_in:
        raise ShapeError(f"input length {u.shape[1]} does not match crossbar with {layer.n_in} rows")
    v = np.column_stack([u, np.ones(len(u))])
    # column currents of the positive and negative arrays, subtracted at the neuron
    s = v @ layer.g_plus.T - v @ layer.g_minus.T
    x = activation_apply(layer.activation, s)
    return x[0] if single else x


def synaptic_power(u, w, b) -> float:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape:
        raise ShapeError(f"input {u.shape} and weights {w.shape} differ")
    return float((u * u) @ np.abs(w) + abs(float(b)))


@dataclass
class PowerReport:
    per_neuron_numerator: np.ndarray
    per_neuron_denominator: np.ndarray
    nasp: float


def _layer_power_terms(net: Network, inputs, epsilon: float, delta_b) -> list[np.ndarray]:
    """Sum over samples of eps*(u.u).|w| + |b + db| per neuron, layer by layer.

    Layer inputs are those of the network actually running, i.e. with
    weights ``eps*W`` and biases ``b + db``.
    """
    u = np.asarray(inputs, dtype=float)
    terms = []
    for layer, db in zip(net.layers, delta_b):
        bias = layer.bias + db
        sq = np.einsum("pj,pj->j", u, u)
        terms.append(epsilon * (np.abs(layer.weights) @ sq) + len(u) * np.abs(bias))
        u = activation_apply(layer.activation, epsilon * (u @ layer.weights.T) + bias)
    return terms


def nasp(net: Network, epsilon: float, delta_b, inputs) -> PowerReport:
    """Normalized average synaptic power of ``net`` scaled by ``epsilon``.

    ``net`` is the original (unscaled) network; ``delta_b`` holds one bias
    adjustment vector per layer. The numerator is evaluated on the scaled
    and adjusted network, the denominator on the original.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    u = np.asarray(inputs, dtype=float)
    if u.ndim != 2 or len(u) == 0:
        raise ShapeError("need a non-empty 2-D batch of inputs")
    if delta_b is None:
        delta_b = [np.zeros(layer.n_out) for layer in net.layers]
    if len(delta_b) != len(net.layers):
        raise ShapeError("need one bias adjustment vector per layer")
    delta_b = [np.broadcast_to(np.asarray(d, dtype=float), (layer.n_out,))
               for d, layer in zip(delta_b, net.layers)]
    zeros = [np.zeros(layer.n_out) for layer in net.layers]
    num = np.concatenate(_layer_power_terms(net, u, epsilon, delta_b))
    den = np.concatenate(_layer_power_terms(net, u, 1.0, zeros))
    total = den.sum()
    if total <= 0:
        raise DegenerateNetworkError("baseline synaptic power is zero")
    return PowerReport(num, den, float(num.sum() / total))
