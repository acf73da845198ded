"""Synaptic weight scaling with optimal bias compensation."""
from .estimators import DenseNetClassifier, ScaledNetworkClassifier
from .nn import Activation, DenseLayer, Network
from .power import PowerReport, nasp
from .scaling import BiasMode, NeuronStats, ScalingPolicy, analytic_delta_b, apply_policy

__all__ = [
    "Activation",
    "BiasMode",
    "DenseLayer",
    "DenseNetClassifier",
    "Network",
    "NeuronStats",
    "PowerReport",
    "ScaledNetworkClassifier",
    "ScalingPolicy",
    "analytic_delta_b",
    "apply_policy",
    "nasp",
]

__version__ = "0.1.0"
