import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qctrl.mlp import SGD, Adam, PolicyNetwork


def finite_difference_jacobian(net, x, h=1e-5):
    theta = net.flat()
    cols = []
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        cols.append((net.with_flat(up).forward(x)[0] - net.with_flat(dn).forward(x)[0]) / (2 * h))
    return np.array(cols).T


@pytest.mark.parametrize("hidden, count", [((100, 50, 30), 7642), ((100, 50), 6152), ((4,), 50)])
def test_parameter_count(hidden, count):
    net = PolicyNetwork.create(hidden, rng=np.random.default_rng(0))
    assert net.n_params == count
    assert net.flat().size == count
    assert net.sizes == (9, *hidden, 2)


def test_zero_net_outputs_zero():
    mu = PolicyNetwork.zeros((100, 50)).forward(np.arange(9.0))
    np.testing.assert_array_equal(mu, np.zeros((1, 2)))


def test_glorot_init():
    net = PolicyNetwork.create((100, 50), rng=np.random.default_rng(1))
    for w, b in zip(net.weights, net.biases):
        limit = np.sqrt(6.0 / sum(w.shape))
        assert np.abs(w).max() <= limit
        assert np.abs(w).max() > 0.9 * limit
        assert not b.any()


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=9, max_size=9), st.integers(0, 1000))
def test_output_in_tanh_range(x, seed):
    net = PolicyNetwork.create((8, 6), rng=np.random.default_rng(seed))
    assert np.all(np.abs(net.forward(np.array(x))) <= 1.0)


def test_batch_forward_matches_rows():
    net = PolicyNetwork.create((7, 5), rng=np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(6, 9))
    batch = net.forward(x)
    for i in range(6):
        np.testing.assert_allclose(batch[i], net.forward(x[i])[0], rtol=0, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_backprop_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = PolicyNetwork.create((6, 5), rng=rng)
    for b in net.biases:
        b += rng.normal(scale=0.1, size=b.shape)
    x = rng.normal(size=9)
    np.testing.assert_allclose(net.jacobian(x), finite_difference_jacobian(net, x), rtol=1e-5, atol=1e-9)


def test_flat_round_trip_and_copy():
    net = PolicyNetwork.create((5,), rng=np.random.default_rng(4))
    clone = net.with_flat(net.flat())
    np.testing.assert_array_equal(clone.flat(), net.flat())
    dup = net.copy()
    dup.weights[0][0, 0] += 1.0
    assert dup.weights[0][0, 0] != net.weights[0][0, 0]
    with pytest.raises(ValueError):
        net.with_flat(np.zeros(net.n_params + 1))


def test_json_round_trip():
    net = PolicyNetwork.create((5, 3), rng=np.random.default_rng(5))
    text = json.dumps(net.to_dict())
    assert json.dumps(PolicyNetwork.from_dict(json.loads(text)).to_dict()) == text


def test_sgd_step():
    p = [np.array([1.0, 2.0])]
    SGD(0.5).step(p, [np.array([2.0, -2.0])])
    np.testing.assert_array_equal(p[0], [0.0, 3.0])


def test_adam_first_step_is_lr_sized():
    # bias correction makes the first step lr * sign(g)
    p = [np.array([0.0, 0.0, 0.0])]
    Adam(lr=1e-3).step(p, [np.array([5.0, -0.01, 0.0])])
    np.testing.assert_allclose(p[0], [-1e-3, 1e-3, 0.0], rtol=1e-5)


def test_adam_minimizes_quadratic():
    p = [np.array([3.0, -2.0])]
    opt = Adam(lr=0.1)
    for _ in range(500):
        opt.step(p, [2 * p[0]])
    assert np.abs(p[0]).max() < 1e-2
