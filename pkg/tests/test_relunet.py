"""Feedforward ReLU networks: evaluation, class bounds, gradients, serialization."""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from mnolab.errors import ParameterError
from mnolab.relunet import (
    NetClassSpec,
    ReluNet,
    clip_apply,
    clip_as_network,
    constant_net,
    count_nonzero,
    count_nonzero_thresholded,
    forward,
    forward_many,
    grad_params,
    load_net,
    max_magnitude,
    net_from_dict,
    net_from_json,
    net_to_dict,
    net_to_json,
    relu,
    save_net,
    validate_class,
)


def identity_net() -> ReluNet:
    """x = relu(x) - relu(-x), one hidden layer of width 2."""
    return ReluNet(
        (np.array([[1.0], [-1.0]]), np.array([[1.0, -1.0]])),
        (np.zeros(2), np.zeros(1)),
    )


def random_net(rng: np.random.Generator, dims: list[int]) -> ReluNet:
    weights = tuple(rng.normal(size=(dims[i + 1], dims[i])) for i in range(len(dims) - 1))
    biases = tuple(rng.normal(size=dims[i + 1]) for i in range(len(dims) - 1))
    return ReluNet(weights, biases)


def test_relu_is_zero_at_zero_and_below():
    assert_allclose(relu(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])


def test_identity_net_reproduces_input():
    net = identity_net()
    for x in (-3.0, -0.5, 0.0, 0.25, 7.0):
        assert_allclose(forward(net, np.array([x])), [x], rtol=0, atol=0)


def test_single_affine_layer():
    net = ReluNet((np.array([[2.0, -1.0]]),), (np.array([0.5]),))
    assert net.depth == 0
    assert net.max_width == 0
    assert_allclose(forward(net, np.array([1.0, 3.0])), [2.0 - 3.0 + 0.5])


def test_forward_many_matches_forward_loop():
    rng = np.random.default_rng(0)
    net = random_net(rng, [3, 5, 4, 2])
    xs = rng.normal(size=(20, 3))
    batched = forward_many(net, xs)
    looped = np.array([forward(net, x) for x in xs])
    assert_allclose(batched, looped, rtol=0, atol=1e-14)


def test_forward_rejects_wrong_input_shape():
    net = identity_net()
    with pytest.raises(ParameterError):
        forward(net, np.array([1.0, 2.0]))


def test_layer_chaining_is_validated():
    with pytest.raises(ParameterError):
        ReluNet((np.ones((2, 1)), np.ones((1, 3))), (np.zeros(2), np.zeros(1)))


def test_parameter_counts_and_magnitude():
    net = ReluNet(
        (np.array([[1.0, 0.0], [0.0, -3.0]]), np.array([[0.5, 0.0]])),
        (np.array([0.0, 1e-13]), np.array([2.0])),
    )
    assert count_nonzero(net) == 5
    assert count_nonzero_thresholded(net, tol=1e-12) == 4
    assert max_magnitude(net) == 3.0


def test_constant_net_ignores_input():
    net = constant_net(3, 2.5)
    assert_allclose(forward(net, np.array([4.0, -1.0, 0.0])), [2.5])
    assert count_nonzero(net) == 1


class TestClip:
    def test_clip_network_matches_clip_apply(self):
        a = 1.0
        net = clip_as_network(a)
        for v in (-2.0, -1.0, -0.3, 0.0, 0.7, 1.0, 3.2):
            assert_allclose(forward(net, np.array([v])), [clip_apply(a, v)], rtol=0, atol=1e-15)

    def test_clip_network_class_bounds(self):
        # Width 1, two hidden layers, six parameters, magnitudes <= 2a.
        a = 1.0
        net = clip_as_network(a)
        spec = NetClassSpec(d1=1, d2=1, L=2, p=1, K=6, kappa=2.0 * a, R=a)
        probes = np.linspace(-4.0, 4.0, 101)[:, None]
        assert validate_class(net, spec, probes) == []

    def test_clip_level_zero_is_the_zero_network(self):
        net = clip_as_network(0.0)
        assert_allclose(forward(net, np.array([5.0])), [0.0])

    def test_negative_clip_level_rejected(self):
        with pytest.raises(ParameterError):
            clip_as_network(-0.1)

    @given(
        a=st.floats(min_value=0.01, max_value=10.0),
        v=st.floats(min_value=-100.0, max_value=100.0),
    )
    def test_clip_range_and_fixed_points(self, a, v):
        net = clip_as_network(a)
        out = forward(net, np.array([v]))[0]
        assert abs(out) <= a + 1e-12
        if abs(v) <= a:
            assert out == pytest.approx(v, abs=1e-12)


@given(
    c=st.floats(min_value=0.0, max_value=50.0),
    x=st.floats(min_value=-10.0, max_value=10.0),
)
def test_positive_homogeneity_with_zero_biases(c, x):
    net = ReluNet(
        (np.array([[1.5], [-2.0]]), np.array([[1.0, 3.0]])),
        (np.zeros(2), np.zeros(1)),
    )
    lhs = forward(net, np.array([c * x]))[0]
    rhs = c * forward(net, np.array([x]))[0]
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_validate_class_reports_violations():
    rng = np.random.default_rng(1)
    net = random_net(rng, [2, 6, 1])
    spec = NetClassSpec(d1=2, d2=1, L=1, p=3, K=1, kappa=0.1, R=0.0)
    kinds = {v.bound for v in validate_class(net, spec, rng.normal(size=(10, 2)))}
    assert "width" in kinds
    assert "nonzero_count" in kinds
    assert "magnitude" in kinds
    assert "output_bound" in kinds


def _central_difference_grads(net, x, upstream, h=1e-6):
    """Finite-difference gradient of upstream . forward in every parameter."""
    d_weights, d_biases = [], []
    for li in range(net.n_affine_layers):
        dw = np.zeros_like(net.weights[li])
        for idx in np.ndindex(*net.weights[li].shape):
            wplus = [w.copy() for w in net.weights]
            wminus = [w.copy() for w in net.weights]
            wplus[li][idx] += h
            wminus[li][idx] -= h
            fplus = forward(ReluNet(tuple(wplus), net.biases), x)
            fminus = forward(ReluNet(tuple(wminus), net.biases), x)
            dw[idx] = upstream @ (fplus - fminus) / (2.0 * h)
        d_weights.append(dw)
        db = np.zeros_like(net.biases[li])
        for j in range(net.biases[li].shape[0]):
            bplus = [b.copy() for b in net.biases]
            bminus = [b.copy() for b in net.biases]
            bplus[li][j] += h
            bminus[li][j] -= h
            fplus = forward(ReluNet(net.weights, tuple(bplus)), x)
            fminus = forward(ReluNet(net.weights, tuple(bminus)), x)
            db[j] = upstream @ (fplus - fminus) / (2.0 * h)
        d_biases.append(db)
    return d_weights, d_biases


def _non_kink_input(net, rng, margin=1e-3):
    """Draw an input whose pre-activations all stay away from the ReLU kink."""
    for _ in range(200):
        x = rng.normal(size=net.input_dim)
        z = x
        ok = True
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            pre = w @ z + b
            if np.min(np.abs(pre)) < margin:
                ok = False
                break
            z = relu(pre)
        if ok:
            return x
    raise AssertionError("could not find an input away from all kinks")


def test_grad_params_matches_central_differences():
    rng = np.random.default_rng(7)
    for dims in ([1, 4, 1], [2, 3, 3, 1], [3, 5, 2]):
        net = random_net(rng, dims)
        x = _non_kink_input(net, rng)
        upstream = rng.normal(size=net.output_dim)
        grads = grad_params(net, x, upstream)
        fd_w, fd_b = _central_difference_grads(net, x, upstream)
        for got, want in zip(grads.d_weights, fd_w):
            assert_allclose(got, want, rtol=0, atol=1e-6)
        for got, want in zip(grads.d_biases, fd_b):
            assert_allclose(got, want, rtol=0, atol=1e-6)


def test_grad_params_uses_zero_subgradient_at_kink():
    # Pre-activation is exactly 0, so the layer receives no gradient.
    net = ReluNet((np.array([[1.0]]), np.array([[1.0]])), (np.zeros(1), np.zeros(1)))
    grads = grad_params(net, np.array([0.0]), np.array([1.0]))
    assert_allclose(grads.d_weights[0], [[0.0]])
    assert_allclose(grads.d_biases[0], [0.0])


def test_grad_params_default_upstream_is_ones():
    rng = np.random.default_rng(3)
    net = random_net(rng, [2, 3, 2])
    x = _non_kink_input(net, rng)
    default = grad_params(net, x)
    explicit = grad_params(net, x, np.ones(2))
    for a, b in zip(default.d_weights, explicit.d_weights):
        assert_allclose(a, b, rtol=0, atol=0)


class TestSerialization:
    def test_dict_schema(self):
        net = identity_net()
        data = net_to_dict(net)
        assert data["dims"] == [1, 1]
        assert [len(layer["W"]) for layer in data["layers"]] == [2, 1]

    def test_json_roundtrip_is_byte_exact(self):
        rng = np.random.default_rng(11)
        net = random_net(rng, [2, 4, 1])
        text = net_to_json(net)
        again = net_to_json(net_from_json(text))
        assert text == again

    def test_roundtrip_preserves_values_exactly(self):
        rng = np.random.default_rng(12)
        net = random_net(rng, [3, 2, 2])
        back = net_from_json(net_to_json(net))
        for a, b in zip(net.weights, back.weights):
            assert np.array_equal(a, b)
        for a, b in zip(net.biases, back.biases):
            assert np.array_equal(a, b)

    def test_declared_dims_are_checked(self):
        data = net_to_dict(identity_net())
        data["dims"] = [2, 1]
        with pytest.raises(ParameterError):
            net_from_dict(data)

    def test_save_and_load(self, tmp_path):
        net = clip_as_network(0.75)
        path = tmp_path / "net.json"
        save_net(net, path)
        loaded = load_net(path)
        assert net_to_json(loaded) == net_to_json(net)
