"""scikit-learn compatible wrappers.

``DenseNetClassifier`` trains a dense network; ``ScaledNetworkClassifier``
takes a fitted one and produces its weight-scaled, bias-compensated
counterpart, so either can sit in a Pipeline or be scored with the usual
tools.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelBinarizer
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import nn
from .power import PowerReport, nasp
from .scaling import BiasMode, ScalingPolicy, apply_policy, collect_stats


def _one_hot(y, classes):
    lb = LabelBinarizer().fit(classes)
    out = lb.transform(y).astype(float)
    if out.shape[1] == 1:
        out = np.column_stack([1.0 - out, out])
    return out


class DenseNetClassifier(ClassifierMixin, BaseEstimator):
    """Dense feed-forward classifier trained with Adam on binary cross-entropy.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers; empty for a single-layer network.
    hidden_activation, output_activation : str
        One of ``linear``, ``relu``, ``sigmoid``, ``tanh``.
    epochs, batch_size, learning_rate : training schedule.
    random_state : int
        Seeds both the Glorot initialization and the minibatch order.
    """

    def __init__(self, hidden_layer_sizes=(), hidden_activation="relu",
                 output_activation="sigmoid", epochs=25, batch_size=128,
                 learning_rate=1e-3, random_state=0, verbose=False):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.verbose = verbose

    def fit(self, X, y, eval_set=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        self.n_features_in_ = X.shape[1]
        Y = _one_hot(y, self.classes_)
        hidden = tuple(self.hidden_layer_sizes)
        sizes = (X.shape[1], *hidden, Y.shape[1])
        acts = (self.hidden_activation,) * len(hidden) + (self.output_activation,)
        self.network_ = nn.init_network(sizes, acts, self.random_state)

        eval_data = None
        if eval_set is not None:
            Xe, ye = eval_set
            eval_data = (check_array(Xe, dtype=np.float64), _one_hot(ye, self.classes_))

        def record(log):
            if eval_data is not None:
                log.extra["eval_accuracy"] = nn.accuracy(self.network_, *eval_data)
            if self.verbose:
                print(f"epoch {log.epoch}: loss={log.train_loss:.4f} "
                      f"acc={log.train_accuracy:.4f} {log.extra}")

        self.history_ = nn.train(self.network_, X, Y, epochs=self.epochs,
                                 batch_size=self.batch_size, lr=self.learning_rate,
                                 seed=self.random_state, callback=record)
        return self

    @classmethod
    def from_network(cls, network: nn.Network, classes=None) -> "DenseNetClassifier":
        """Wrap an already-trained network, e.g. one read by ``load_network``."""
        hidden = tuple(layer.n_out for layer in network.layers[:-1])
        est = cls(hidden_layer_sizes=hidden,
                  hidden_activation=network.layers[0].activation.value if hidden else "relu",
                  output_activation=network.layers[-1].activation.value,
                  random_state=network.seed or 0)
        est.network_ = network
        est.classes_ = np.arange(network.n_out) if classes is None else np.asarray(classes)
        est.n_features_in_ = network.n_in
        est.history_ = []
        return est

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return nn.predict_outputs(self.network_, check_array(X, dtype=np.float64))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class ScaledNetworkClassifier(ClassifierMixin, BaseEstimator):
    """Weight-scaled copy of a fitted :class:`DenseNetClassifier`.

    ``fit`` does not touch the wrapped estimator. It measures pre-activation
    statistics on ``X`` (the training split), picks bias adjustments by
    ``bias_mode`` and stores the scaled network as ``network_``.
    """

    def __init__(self, estimator, epsilon=1.0, bias_mode="analytic",
                 retrain_epochs=10, random_state=0):
        self.estimator = estimator
        self.epsilon = epsilon
        self.bias_mode = bias_mode
        self.retrain_epochs = retrain_epochs
        self.random_state = random_state

    def fit(self, X, y=None):
        check_is_fitted(self.estimator, "network_")
        X = check_array(X, dtype=np.float64)
        base = self.estimator.network_
        self.classes_ = self.estimator.classes_
        self.n_features_in_ = X.shape[1]
        mode = BiasMode(self.bias_mode)
        Y = None
        if mode in (BiasMode.EMPIRICAL, BiasMode.RETRAIN):
            if y is None:
                raise ValueError(f"bias_mode={mode.value!r} needs training labels")
            Y = _one_hot(y, self.classes_)
        self.stats_ = collect_stats(base, X) if mode is not BiasMode.NONE else None
        policy = ScalingPolicy(self.epsilon, mode)
        self.network_ = apply_policy(base, policy, self.stats_, X, Y,
                                     retrain_epochs=self.retrain_epochs, seed=self.random_state)
        self.delta_b_ = policy.delta_b
        return self

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return nn.predict_outputs(self.network_, check_array(X, dtype=np.float64))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]

    def synaptic_power(self, X) -> PowerReport:
        """Power of the scaled network on ``X`` relative to the original."""
        check_is_fitted(self, "network_")
        return nasp(self.estimator.network_, self.epsilon, self.delta_b_,
                    check_array(X, dtype=np.float64))
