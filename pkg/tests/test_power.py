import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from synscale import nn
from synscale.exceptions import DegenerateNetworkError, ShapeError
from synscale.nn import DenseLayer, Network
from synscale.power import (
    ConductancePair,
    CrossbarLayer,
    crossbar_forward,
    nasp,
    synaptic_power,
    weight_to_conductances,
)


@pytest.mark.parametrize("w, expected", [(0.3, (0.3, 0.0)), (-0.7, (0.0, 0.7)), (0.0, (0.0, 0.0))])
def test_weight_to_conductances(w, expected):
    assert weight_to_conductances(w) == ConductancePair(*expected)


@given(arrays(float, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
def test_conductances_round_trip(w):
    gp, gm = weight_to_conductances(w)
    assert np.all(gp >= 0) and np.all(gm >= 0)
    assert np.all((gp == 0) | (gm == 0))
    np.testing.assert_array_equal(gp - gm, w)
    np.testing.assert_array_equal(gp + gm, np.abs(w))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["linear", "relu", "sigmoid", "tanh", "step"]))
def test_crossbar_matches_forward(seed, act):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 12, size=2)
    layer = DenseLayer(rng.normal(size=(m, n)), rng.normal(size=m), act)
    u = rng.random((6, n))
    expected = nn.forward(Network([layer]), u).output
    got = crossbar_forward(CrossbarLayer.from_layer(layer), u)
    if act == "step":
        # threshold can flip only when s is within roundoff of zero
        s = nn.forward(Network([layer]), u).pre[0]
        mask = np.abs(s) > 1e-12
        np.testing.assert_array_equal(got[mask], expected[mask])
    else:
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_crossbar_zero_conductances():
    layer = DenseLayer(np.zeros((3, 4)), np.zeros(3), "sigmoid")
    out = crossbar_forward(CrossbarLayer.from_layer(layer), np.ones(4))
    np.testing.assert_array_equal(out, [0.5, 0.5, 0.5])


def test_crossbar_zero_input_gives_bias():
    b = np.array([0.4, -1.2])
    layer = DenseLayer(np.ones((2, 3)), b, "tanh")
    out = crossbar_forward(CrossbarLayer.from_layer(layer), np.zeros(3))
    np.testing.assert_allclose(out, np.tanh(b), atol=1e-15)


def test_crossbar_shape_error():
    xb = CrossbarLayer.from_layer(DenseLayer(np.ones((2, 3)), np.zeros(2)))
    with pytest.raises(ShapeError):
        crossbar_forward(xb, np.ones(4))


def test_synaptic_power_examples():
    assert synaptic_power(np.zeros(3), [1.0, -2.0, 3.0], 0.0) == 0.0
    assert synaptic_power([1.0], [0.5], -0.25) == pytest.approx(0.75)
    assert synaptic_power([0.5, 0.5], [1.0, -1.0], 0.0) == pytest.approx(0.5)


@given(arrays(float, 5, elements=st.floats(0, 1)), arrays(float, 5, elements=st.floats(-5, 5)),
       st.floats(-5, 5))
def test_synaptic_power_at_least_bias(u, w, b):
    assert synaptic_power(u, w, b) >= abs(b)


def _single_layer(seed=0, m=4, n=6, act="sigmoid"):
    rng = np.random.default_rng(seed)
    return Network([DenseLayer(rng.normal(size=(m, n)), rng.normal(size=m), act)]), rng.random((30, n))


def test_nasp_identity_at_one():
    net, u = _single_layer()
    assert nasp(net, 1.0, None, u).nasp == pytest.approx(1.0, abs=1e-15)


def test_nasp_zero_when_everything_vanishes():
    rng = np.random.default_rng(1)
    net = Network([DenseLayer(rng.normal(size=(3, 5)), np.zeros(3))])
    assert nasp(net, 0.0, None, rng.random((8, 5))).nasp == 0.0


def test_nasp_hand_example():
    # weight term (u.u).|w| = 9, |b| = 1: (0.5*9 + 1) / (9 + 1)
    net = Network([DenseLayer([[9.0]], [1.0], "linear")])
    rep = nasp(net, 0.5, None, [[1.0]])
    assert rep.nasp == pytest.approx(0.55)
    np.testing.assert_allclose(rep.per_neuron_numerator, [5.5])
    np.testing.assert_allclose(rep.per_neuron_denominator, [10.0])


def test_nasp_uses_adjusted_bias():
    net = Network([DenseLayer([[9.0]], [1.0], "linear")])
    assert nasp(net, 0.5, [np.array([-3.0])], [[1.0]]).nasp == pytest.approx((4.5 + 2.0) / 10.0)


def test_nasp_report_consistency():
    net = nn.init_network((6, 5, 3), ("relu", "sigmoid"), seed=3)
    u = np.random.default_rng(0).random((20, 6))
    rep = nasp(net, 0.4, [np.full(5, 0.1), np.full(3, -0.2)], u)
    assert rep.per_neuron_numerator.shape == (8,)
    assert rep.nasp == pytest.approx(rep.per_neuron_numerator.sum() / rep.per_neuron_denominator.sum())
    assert rep.nasp >= 0


def test_nasp_hidden_inputs_come_from_scaled_network():
    w1 = np.array([[2.0]])
    net = Network([DenseLayer(w1, [0.0], "linear"), DenseLayer([[1.0]], [0.0], "linear")])
    # eps=0.5: hidden activation halves, so the second layer's weight term drops by 4
    rep = nasp(net, 0.5, None, [[1.0]])
    np.testing.assert_allclose(rep.per_neuron_denominator, [2.0, 4.0])
    np.testing.assert_allclose(rep.per_neuron_numerator, [1.0, 0.5 * 1.0])


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(["sigmoid", "relu", "tanh"]))
def test_nasp_affine_in_epsilon_for_single_layer(seed, act):
    net, u = _single_layer(seed, act=act)
    rep = nasp(net, 1.0, None, u)
    a = rep.per_neuron_denominator.sum() - len(u) * np.abs(net.layers[0].bias).sum()
    b = len(u) * np.abs(net.layers[0].bias).sum()
    for eps in np.linspace(0, 1, 6):
        assert nasp(net, eps, None, u).nasp == pytest.approx((eps * a + b) / (a + b), abs=1e-12)


def test_nasp_degenerate():
    net = Network([DenseLayer(np.zeros((2, 3)), np.zeros(2))])
    with pytest.raises(DegenerateNetworkError):
        nasp(net, 0.5, None, np.ones((4, 3)))


def test_nasp_shape_errors():
    net, u = _single_layer()
    with pytest.raises(ShapeError):
        nasp(net, 0.5, [np.zeros(4), np.zeros(4)], u)
    with pytest.raises(ShapeError):
        nasp(net, 0.5, None, np.empty((0, 6)))
