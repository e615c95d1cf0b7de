"""Layer forward/backward behavior and architecture parameter counts."""

import numpy as np
import pytest

from spikegrad.layers import Dense, Dropout, LifLayer, Lstm, Model
from spikegrad.tensor import ShapeError, Tensor, backward


def fd_grad_of_param(compute_loss, param, eps=1e-5):
    """Central differences w.r.t. one parameter tensor (independent oracle)."""
    base = param.data.copy()
    grad = np.zeros_like(base)
    flat_base = param.data.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(base.size):
        orig = flat_base[i]
        flat_base[i] = orig + eps
        hi = compute_loss()
        flat_base[i] = orig - eps
        lo = compute_loss()
        flat_base[i] = orig
        flat_grad[i] = (hi - lo) / (2 * eps)
    return grad


class TestDense:
    def test_parameter_counts_match_architecture_tables(self):
        assert Dense(1200, 1200).parameter_count() == 1_441_200
        assert Dense(30, 30).parameter_count() == 930
        assert Dense(30, 10).parameter_count() == 310

    def test_time_distributed_application(self):
        rng = np.random.default_rng(1)
        layer = Dense(4, 3, "tanh", rng)
        x = rng.normal(size=(2, 5, 4))
        out = layer.forward(Tensor(x))
        assert out.shape == (2, 5, 3)
        # per-timestep result equals applying the layer to that timestep alone
        single = layer.forward(Tensor(x[:, 2, :]))
        np.testing.assert_allclose(out.data[:, 2, :], single.data, rtol=1e-12)

    def test_softmax_head_normalizes(self):
        rng = np.random.default_rng(2)
        layer = Dense(6, 4, "softmax", rng)
        out = layer.forward(Tensor(rng.normal(size=(3, 7, 6))))
        np.testing.assert_allclose(out.data.sum(axis=-1), np.ones((3, 7)), rtol=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            Dense(4, 3).forward(Tensor(np.ones((2, 5))))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        layer = Dense(3, 2, "sigmoid", rng)
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        target = rng.normal(size=(4, 2))

        def loss_tensor():
            diff = layer.forward(x) - Tensor(target)
            return (diff * diff).sum()

        grads = backward(loss_tensor())
        for param in (layer.weights, layer.bias, x):
            numeric = fd_grad_of_param(lambda: loss_tensor().item(), param)
            np.testing.assert_allclose(grads[param].data, numeric, rtol=1e-4, atol=1e-7)


class TestLstm:
    def test_parameter_count_matches_table(self):
        assert Lstm(1200, 30).parameter_count() == 147_720

    def test_zero_input_zero_params_is_silent(self):
        layer = Lstm(3, 2)
        for param in (layer.w_x, layer.w_h, layer.bias):
            param.data = np.zeros_like(param.data)
        out = layer.forward(Tensor(np.zeros((2, 4, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4, 2)))

    def test_forget_bias_initialized_to_one(self):
        layer = Lstm(5, 3)
        np.testing.assert_array_equal(layer.bias.data[3:6], np.ones(3))
        assert not layer.bias.data[:3].any() and not layer.bias.data[6:].any()

    def test_returns_full_sequence(self):
        rng = np.random.default_rng(4)
        out = Lstm(3, 2, rng).forward(Tensor(rng.normal(size=(2, 6, 3))))
        assert out.shape == (2, 6, 2)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        layer = Lstm(3, 2, rng)
        x = Tensor(rng.normal(size=(1, 4, 3)), requires_grad=True)
        weights = rng.normal(size=(1, 4, 2))

        def loss_tensor():
            return (layer.forward(x) * Tensor(weights)).sum()

        grads = backward(loss_tensor())
        for param in (layer.w_x, layer.w_h, layer.bias, x):
            numeric = fd_grad_of_param(lambda: loss_tensor().item(), param)
            np.testing.assert_allclose(grads[param].data, numeric, rtol=1e-4, atol=1e-7)


class TestDropout:
    def test_rate_zero_and_eval_mode_are_identity(self):
        x = Tensor(np.arange(12.0).reshape(3, 4))
        assert Dropout(0.0).forward(x, training=True) is x
        assert Dropout(0.5).forward(x, training=False) is x

    def test_invalid_rate_rejected(self):
        with pytest.raises(ValueError):
            Dropout(1.0)
        with pytest.raises(ValueError):
            Dropout(-0.1)

    def test_mean_preserved(self):
        rng = np.random.default_rng(6)
        layer = Dropout(0.3, rng)
        x = Tensor(np.ones(10))
        trials = 10_000
        total = np.zeros(10)
        for _ in range(trials):
            total += layer.forward(x, training=True).data
        mean = total.mean() / trials
        sigma = np.sqrt(0.3 / 0.7) / np.sqrt(trials * 10)
        assert abs(mean - 1.0) <= 3 * sigma

    def test_seeded_masks_reproducible(self):
        x = Tensor(np.ones((4, 4)))
        a = Dropout(0.4, np.random.default_rng(42))
        b = Dropout(0.4, np.random.default_rng(42))
        for _ in range(5):
            np.testing.assert_array_equal(
                a.forward(x, training=True).data, b.forward(x, training=True).data
            )


class TestLifLayer:
    def test_shared_parameter_sets_tile_cyclically(self):
        rng = np.random.default_rng(7)
        layer = LifLayer(12, rng, n_param_sets=3)
        assert layer.parameter_count() == 6
        view = layer.params_view()
        np.testing.assert_array_equal(view.input_values.reshape(4, 3),
                                      np.tile(layer.w_input.data, (4, 1)))

    def test_param_sets_must_divide(self):
        with pytest.raises(ValueError):
            LifLayer(10, n_param_sets=3)

    def test_clamp_projects_into_valid_region(self):
        layer = LifLayer(4)
        layer.w_input.data = np.array([-1.0, 0.0, 0.5, 3.0])
        layer.w_leak.data = np.array([-0.2, 0.5, 0.999999999, 2.0])
        layer.clamp()
        assert layer.w_input.data.min() >= 1e-6
        assert layer.w_leak.data.min() >= 0.0
        assert layer.w_leak.data.max() <= 1.0 - 1e-6

    def test_forward_shape_and_tape(self):
        rng = np.random.default_rng(8)
        layer = LifLayer(6, rng, n_param_sets=2)
        x = Tensor(rng.uniform(0, 2, size=(2, 10, 6)), requires_grad=True)
        out = layer.forward(x, record_trace=True)
        assert out.spikes.shape == (2, 10, 6)
        grads = backward(out.spikes.sum())
        assert layer.w_input in grads and layer.w_leak in grads
        assert grads[layer.w_input].shape == (2,)


class TestModel:
    def _tiny_model(self, seed=0):
        rng = np.random.default_rng(seed)
        layers = [
            Dense(6, 6, "identity", rng, name="encoder"),
            LifLayer(6, rng, name="lif"),
            Lstm(6, 4, rng, name="lstm"),
            Dense(4, 3, "softmax", rng, name="softmax"),
        ]
        return Model(layers, meta={"network": 2, "rows": 2, "cols": 5, "channels": 3,
                                   "classes": 3, "hidden": 4, "dropout": 0.0, "seed": seed})

    def test_forward_and_capture(self):
        model = self._tiny_model()
        capture = {}
        probs = model.forward(np.random.default_rng(1).uniform(0, 1, (2, 5, 6)), capture=capture)
        assert probs.shape == (2, 5, 3)
        assert capture["spikes"].shape == (2, 5, 6)
        assert capture["potential"].shape == (2, 5, 6)
        assert capture["hidden"].shape == (2, 5, 4)
        assert capture["probs"].shape == (2, 5, 3)

    def test_gradient_mode_switch(self):
        model = self._tiny_model()
        assert model.gradient_mode == "surrogate"
        model.set_gradient_mode("disabled")
        assert model.gradient_mode == "disabled"
        assert not model.lif_layers()[0].surrogate
        with pytest.raises(ValueError):
            model.set_gradient_mode("off")

    def test_snapshot_roundtrip(self):
        model = self._tiny_model()
        snap = model.snapshot()
        other = self._tiny_model(seed=9)
        other.load_snapshot(snap)
        for (_, a), (_, b) in zip(model.parameters(), other.parameters()):
            np.testing.assert_array_equal(a.data, b.data)

    def test_snapshot_validation(self):
        model = self._tiny_model()
        snap = model.snapshot()
        missing = dict(snap)
        missing.pop("lif.w_input")
        with pytest.raises(KeyError):
            model.load_snapshot(missing)
        bad = dict(snap)
        bad["lif.w_input"] = np.zeros(9)
        with pytest.raises(ShapeError):
            model.load_snapshot(bad)
