import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdp_audit.critic import CriticNetwork, ParamGradient


def finite_difference(net, x, w, h=1e-5):
    theta = net.flat_params()
    grad = np.empty_like(theta)
    for k in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        net.set_flat_params(up)
        f_up = float(w @ net.forward_batch(x))
        net.set_flat_params(down)
        f_down = float(w @ net.forward_batch(x))
        grad[k] = (f_up - f_down) / (2 * h)
    net.set_flat_params(theta)
    return grad


def gradient_rel_error(net, x, w):
    exact = net.weighted_param_gradient(x, w).flatten()
    approx = finite_difference(net, x, w)
    scale = np.maximum(np.abs(exact), np.abs(approx))
    # coordinates that are zero in both (dead units) carry no information
    mask = scale > 1e-7
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(exact - approx)[mask] / np.maximum(scale[mask], 1e-4)))


def random_case(sizes, seed, clamp=None):
    rng = np.random.default_rng(seed)
    net = CriticNetwork.init(int(rng.integers(1 << 30)), sizes, clamp_bound=clamp)
    for b in net.biases:
        b[...] = rng.normal(0, 0.1, b.shape)
    x = rng.normal(0, 1.5, 5)
    w = rng.normal(0, 1, 5)
    return net, x, w


class TestInit:
    def test_deterministic(self):
        a = CriticNetwork.init(7, (1, 100, 100, 1))
        b = CriticNetwork.init(7, (1, 100, 100, 1))
        assert np.array_equal(a.flat_params(), b.flat_params())

    def test_small_net_finite(self):
        net = CriticNetwork.init(7, (1, 4, 1))
        assert np.isfinite(net.forward(0.0))

    def test_glorot_limits_and_zero_bias(self):
        net = CriticNetwork.init(3, (1, 100, 100, 1))
        for w, (fi, fo) in zip(net.weights, [(1, 100), (100, 100), (100, 1)]):
            assert np.max(np.abs(w)) <= np.sqrt(6 / (fi + fo))
        assert all(np.all(b == 0) for b in net.biases)

    @pytest.mark.parametrize("sizes", [(1,), (1, 0, 1), (1, 4, 2), (1, 2.5, 1)])
    def test_malformed_sizes(self, sizes):
        with pytest.raises(ValueError):
            CriticNetwork.init(0, sizes)

    def test_clamped_output_bound(self):
        net = CriticNetwork.init(7, (1, 100, 100, 1), clamp_bound=1.0)
        for w in net.weights:
            w *= 20  # push raw outputs far outside the bound
        z = np.random.default_rng(0).normal(0, 50, 100_000)
        assert np.max(np.abs(net.forward_batch(z))) <= 1.0


class TestForward:
    def test_zero_params(self):
        net = CriticNetwork.init(1, (1, 8, 1))
        net.set_flat_params(np.zeros(net.num_params))
        assert np.all(net.forward_batch(np.linspace(-3, 3, 7)) == 0)

    def test_linear(self):
        net = CriticNetwork((1, 1), [np.array([[2.5]])], [np.array([-0.5])])
        assert net.forward(2.0) == 4.5

    def test_matches_independent_implementation(self):
        net = CriticNetwork.init(11, (1, 100, 100, 1))
        h = np.array([0.5])
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = np.array([sum(h[k] * w[k, j] for k in range(w.shape[0])) + b[j] for j in range(w.shape[1])])
            h = z if i == len(net.weights) - 1 else np.where(z > 0, z, 0.0)
        assert net.forward(0.5) == pytest.approx(h[0], rel=1e-12, abs=1e-14)

    def test_dimension_mismatch(self):
        net = CriticNetwork.init(0, (2, 3, 1))
        with pytest.raises(ValueError):
            net.forward([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            net.forward_batch(np.ones((4, 3)))

    def test_multidimensional_input(self):
        net = CriticNetwork.init(0, (2, 3, 1))
        out = net.forward_batch(np.ones((4, 2)))
        assert out.shape == (4,)
        assert net.forward([1.0, 1.0]) == out[0]


class TestGradient:
    def test_zero_weights_zero_gradient(self):
        net, x, _ = random_case((1, 4, 1), 0)
        g = net.weighted_param_gradient(x, np.zeros_like(x))
        assert np.all(g.flatten() == 0)

    def test_linear_hand_derivative(self):
        net = CriticNetwork((1, 1), [np.array([[0.3]])], [np.array([0.1])])
        g = net.weighted_param_gradient([2.0], [1.5])
        assert g.weights[0][0, 0] == 1.5 * 2.0
        assert g.biases[0][0] == 1.5

    def test_length_mismatch(self):
        net, x, _ = random_case((1, 4, 1), 0)
        with pytest.raises(ValueError):
            net.weighted_param_gradient(x, np.ones(x.size + 1))

    @pytest.mark.parametrize("sizes", [(1, 4, 1), (1, 100, 100, 1)])
    def test_finite_differences(self, sizes):
        for case in range(20 if sizes == (1, 4, 1) else 3):
            net, x, w = random_case(sizes, case)
            assert gradient_rel_error(net, x, w) <= 1e-4

    def test_finite_differences_with_clamp(self):
        for case in range(5):
            net, x, w = random_case((1, 6, 6, 1), case, clamp=0.7)
            assert gradient_rel_error(net, x, w) <= 1e-4

    def test_standardized_inputs(self):
        net, x, w = random_case((1, 5, 1), 4)
        net.input_shift, net.input_scale = 0.7, 2.5
        assert gradient_rel_error(net, x, w) <= 1e-4


class TestUpdate:
    def test_zero_step(self):
        net, x, w = random_case((1, 4, 1), 1)
        before = net.flat_params()
        net.apply_update(net.weighted_param_gradient(x, w), 0.0)
        assert np.array_equal(before, net.flat_params())

    def test_projection(self):
        net = CriticNetwork.init(0, (1, 4, 1))
        K = 0.5
        net.set_flat_params(net.flat_params() * (2 * K / np.linalg.norm(net.flat_params())))
        net.param_radius = K
        net.apply_update(net.zero_gradient(), 1.0)
        assert np.linalg.norm(net.flat_params()) == pytest.approx(K, rel=1e-12)

    def test_two_updates_equal_one_combined_on_linear_net(self):
        a = CriticNetwork((1, 1), [np.array([[0.3]])], [np.array([0.1])])
        b = a.copy()
        g1 = a.weighted_param_gradient([1.0, 2.0], [0.5, -1.0])
        g2 = a.weighted_param_gradient([3.0], [2.0])
        a.apply_update(g1, 0.1).apply_update(g2, 0.1)
        b.apply_update(g1 + g2, 0.1)
        assert np.allclose(a.flat_params(), b.flat_params(), rtol=0, atol=1e-15)

    def test_shape_mismatch(self):
        net = CriticNetwork.init(0, (1, 4, 1))
        other = CriticNetwork.init(0, (1, 5, 1))
        with pytest.raises(ValueError):
            net.apply_update(other.zero_gradient(), 0.1)

    def test_scaled_gradient(self):
        g = ParamGradient([np.ones((1, 2))], [np.ones(2)])
        assert np.all(g.scaled(3.0).flatten() == 3.0)


@given(seed=st.integers(0, 10_000), K=st.floats(0.01, 5.0), steps=st.integers(1, 5))
def test_projection_contract(seed, K, steps):
    rng = np.random.default_rng(seed)
    net = CriticNetwork.init(seed, (1, 6, 1), param_radius=K)
    assert np.linalg.norm(net.flat_params()) <= K + 1e-12
    for _ in range(steps):
        x = rng.normal(size=4)
        net.apply_update(net.weighted_param_gradient(x, rng.normal(size=4)), float(rng.uniform(0, 10)))
        assert np.linalg.norm(net.flat_params()) <= K + 1e-12


@given(seed=st.integers(0, 10_000), M=st.floats(0.1, 5.0))
def test_bounded_output_contract(seed, M):
    net = CriticNetwork.init(seed, (1, 16, 1), clamp_bound=M)
    net.set_flat_params(net.flat_params() * 30)
    z = np.random.default_rng(seed).normal(0, 100, 1000)
    assert np.max(np.abs(net.forward_batch(z))) <= M


def test_serialization_roundtrip(tmp_path):
    net = CriticNetwork.init(5, (1, 7, 3, 1), clamp_bound=2.0, param_radius=9.0)
    net.input_shift, net.input_scale = 0.25, 1.5
    path = tmp_path / "critic.json"
    net.save(path)
    back = CriticNetwork.load(path)
    assert np.array_equal(back.flat_params(), net.flat_params())
    z = np.linspace(-2, 2, 11)
    assert np.array_equal(back.forward_batch(z), net.forward_batch(z))
    assert back.seed == 5 and back.clamp_bound == 2.0 and back.param_radius == 9.0


def test_unknown_format():
    with pytest.raises(ValueError):
        CriticNetwork.from_dict({"format": "other"})
