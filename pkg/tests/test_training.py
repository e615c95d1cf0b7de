"""Loss, metrics, optimizers, the training loop, and the network builders."""

import numpy as np
import pytest

import spikegrad.training as training
from spikegrad.data import generate_synthetic
from spikegrad.tensor import Tensor, backward
from spikegrad.training import (
    Adam,
    OptimizerError,
    Sgd,
    TrainConfig,
    accuracy_time_averaged,
    build_network1,
    build_network2,
    confusion_counts,
    cross_entropy_time_distributed,
    evaluate,
    train,
)

DESK_DIMS = (12, 10, 3)


def tiny_dataset(seed=0, classes=3, per_class=8):
    return generate_synthetic(classes, per_class, dims=DESK_DIMS, seed=seed)


def tiny_config(**kwargs):
    base = dict(learning_rate=0.01, optimizer="adam", batch_size=4, max_epochs=2,
                patience=30, seed=0, gradient_mode="surrogate", dropout=0.2)
    base.update(kwargs)
    return TrainConfig(**base)


class TestLoss:
    def test_uniform_probs_give_log_classes(self):
        probs = Tensor(np.full((2, 7, 10), 0.1))
        loss = cross_entropy_time_distributed(probs, [3, 8])
        assert loss.item() == pytest.approx(np.log(10), rel=1e-12)

    def test_one_hot_gives_zero(self):
        probs = np.zeros((1, 4, 5))
        probs[0, :, 2] = 1.0
        assert cross_entropy_time_distributed(Tensor(probs), [2]).item() == 0.0

    def test_unnormalized_probs_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            cross_entropy_time_distributed(Tensor(np.full((1, 3, 4), 0.3)), [0])

    def test_label_range_checked(self):
        probs = Tensor(np.full((1, 3, 4), 0.25))
        with pytest.raises(ValueError):
            cross_entropy_time_distributed(probs, [4])

    def test_gradient_wrt_logits_is_softmax_minus_onehot(self):
        import spikegrad.tensor as T

        rng = np.random.default_rng(11)
        logits = Tensor(rng.normal(size=(3, 5, 4)), requires_grad=True)
        batch, steps, classes = logits.shape
        labels = np.array([1, 3, 0])
        loss = cross_entropy_time_distributed(T.softmax(logits, axis=-1), labels)
        grad = backward(loss)[logits].data
        onehot = np.zeros((batch, classes))
        onehot[np.arange(batch), labels] = 1.0
        probs = T.softmax(logits, axis=-1).data
        expected = (probs - onehot[:, None, :]) / (batch * steps)
        np.testing.assert_allclose(grad, expected, rtol=1e-10, atol=1e-14)


class TestAccuracy:
    def test_constant_probability(self):
        probs = np.full((3, 6, 5), 0.15)
        probs[:, :, 2] = 0.4
        assert accuracy_time_averaged(probs, [2, 2, 2]) == pytest.approx(0.4)

    def test_uniform_predictor_is_chance(self):
        probs = np.full((10, 4, 10), 0.1)
        assert accuracy_time_averaged(probs, np.arange(10)) == pytest.approx(0.1)

    def test_linear_ramp_averages_to_half(self):
        steps = 11
        ramp = np.linspace(0.0, 1.0, steps)
        probs = np.zeros((1, steps, 2))
        probs[0, :, 0] = ramp
        probs[0, :, 1] = 1.0 - ramp
        assert accuracy_time_averaged(probs, [0]) == pytest.approx(0.5)

    def test_confusion_counts(self):
        probs = np.zeros((4, 2, 3))
        probs[0, :, 0] = 1.0
        probs[1, :, 2] = 1.0
        probs[2, :, 1] = 1.0
        probs[3, :, 1] = 1.0
        counts = confusion_counts(probs, [0, 2, 0, 1], 3)
        assert counts[0, 0] == 1 and counts[2, 2] == 1
        assert counts[0, 1] == 1 and counts[1, 1] == 1
        assert counts.sum() == 4


class TestOptimizers:
    def test_sgd_step_value(self):
        w = Tensor(np.array([1.0]), requires_grad=True)
        Sgd(0.1).step([("w", w)], {w: Tensor(np.array([2.0]))})
        assert w.data[0] == pytest.approx(0.8)

    def test_zero_gradient_leaves_params(self):
        w = Tensor(np.array([1.5]), requires_grad=True)
        Sgd(0.1).step([("w", w)], {w: Tensor(np.array([0.0]))})
        assert w.data[0] == 1.5
        adam = Adam(0.1)
        adam.step([("w", w)], {w: Tensor(np.array([0.0]))})
        assert w.data[0] == 1.5

    def test_missing_gradient_skips_param(self):
        w = Tensor(np.array([2.0]), requires_grad=True)
        Adam(0.1).step([("w", w)], {})
        assert w.data[0] == 2.0

    def test_adam_first_step_is_signed_learning_rate(self):
        for g in (3.0, -0.25):
            w = Tensor(np.array([1.0]), requires_grad=True)
            Adam(0.01).step([("w", w)], {w: Tensor(np.array([g]))})
            assert w.data[0] - 1.0 == pytest.approx(-0.01 * np.sign(g), rel=1e-6)

    def test_non_finite_gradient_raises(self):
        w = Tensor(np.array([1.0]), requires_grad=True)
        bad = np.array([np.inf])
        with pytest.raises(OptimizerError, match="w"):
            Adam(0.1).step([("w", w)], {w: bad})


class TestBuilders:
    def test_paper_scale_parameter_counts(self):
        net1 = build_network1(400, 500, 3)
        by_name = {layer.name: layer for layer in net1.layers}
        assert by_name["lif"].parameter_count() == 6
        assert by_name["lstm"].parameter_count() == 147_720
        assert by_name["dense"].parameter_count() == 930
        assert by_name["softmax"].parameter_count() == 310

        net2 = build_network2(400, 500, 3)
        by_name = {layer.name: layer for layer in net2.layers}
        assert by_name["encoder"].parameter_count() == 1_441_200
        assert by_name["lif"].parameter_count() == 2_400

    def test_desk_scale_lif_count(self):
        net2 = build_network2(32, 40, 3)
        by_name = {layer.name: layer for layer in net2.layers}
        assert by_name["lif"].parameter_count() == 2 * 96

    def test_column_index_is_time(self):
        model = build_network1(4, 9, 3, n_classes=5, hidden=6)
        probs = model.forward(np.random.default_rng(0).uniform(0, 1, (2, 9, 12)))
        assert probs.shape == (2, 9, 5)

    def test_build_rejects_bad_network_id(self):
        with pytest.raises(ValueError):
            training.build_network(3, 4, 4, 3)


class TestGradientModes:
    def _batch_and_model(self, mode):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, dropout_rate=0.0,
                               seed=1, gradient_mode=mode)
        x = Tensor(ds.encoded()[:6])
        probs = model.forward(x, training=True)
        loss = cross_entropy_time_distributed(probs, ds.labels[:6])
        return model, backward(loss)

    def test_disabled_blocks_everything_below_the_spiking_layer(self):
        model, grads = self._batch_and_model("disabled")
        by_name = {layer.name: layer for layer in model.layers}
        for name in ("encoder.weights", "encoder.bias", "lif.w_input", "lif.w_leak"):
            layer_name, attr = name.split(".")
            param = getattr(by_name[layer_name], attr)
            if param in grads:
                assert not grads[param].data.any(), name
        lstm = by_name["lstm"]
        assert grads[lstm.w_x].data.any()

    def test_surrogate_reaches_pre_spiking_params(self):
        model, grads = self._batch_and_model("surrogate")
        capture = {}
        ds = tiny_dataset()
        model.forward(Tensor(ds.encoded()[:6]), capture=capture)
        assert capture["spikes"].any()  # the batch elicits spikes
        encoder = model.layers[0]
        assert grads[encoder.weights].data.any()
        lif = model.lif_layers()[0]
        assert grads[lif.w_input].data.any()

    def test_disabled_training_leaves_early_layers_at_init(self):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=2,
                               gradient_mode="disabled")
        before = model.snapshot()
        train(model, ds, tiny_config(gradient_mode="disabled", max_epochs=2))
        after = model.snapshot()
        for name in ("encoder.weights", "encoder.bias", "lif.w_input", "lif.w_leak"):
            np.testing.assert_array_equal(before[name], after[name])
        assert not np.array_equal(before["lstm.w_x"], after["lstm.w_x"])


class TestTrainLoop:
    def test_history_and_epoch_zero_row(self):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=3)
        run = train(model, ds, tiny_config(max_epochs=3))
        assert [m.epoch for m in run.history] == list(range(len(run.history)))
        assert run.history[0].epoch == 0
        assert run.best_epoch <= run.history[-1].epoch
        assert set(run.best_params) == {name for name, _ in model.parameters()}
        for m in run.history:
            assert 0.0 <= m.train_accuracy <= 1.0
            assert 0.0 <= m.test_accuracy <= 1.0
            assert 0.0 <= m.spike_density <= 1.0

    def test_fixed_seed_reproduces_history_bitwise(self):
        histories = []
        for _ in range(2):
            ds = tiny_dataset(seed=5)
            model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=5)
            run = train(model, ds, tiny_config(seed=5, max_epochs=2))
            histories.append([(m.train_accuracy, m.test_accuracy, m.mean_loss, m.spike_density)
                              for m in run.history])
        assert histories[0] == histories[1]

    def test_patience_stops_after_no_improvement(self):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=6)
        config = tiny_config(max_epochs=40, patience=2, learning_rate=1e-7)
        run = train(model, ds, config)
        last = run.history[-1].epoch
        assert last < 40
        assert last - run.best_epoch == config.patience

    def test_best_checkpoint_tracks_best_test_accuracy(self):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=7)
        run = train(model, ds, tiny_config(max_epochs=3))
        best_row = max(run.history, key=lambda m: m.test_accuracy)
        assert run.best_test_accuracy == best_row.test_accuracy
        # restoring the checkpoint reproduces the logged test accuracy exactly
        model.load_snapshot(run.best_params)
        ev = evaluate(model, ds.encoded(), ds.labels, ds.test_idx, 4)
        assert ev.accuracy == run.history[run.best_epoch].test_accuracy

    def test_divergence_aborts_with_checkpoint(self, monkeypatch):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=8)
        calls = {"n": 0}
        real_backward = training.backward

        def exploding_backward(loss):
            calls["n"] += 1
            if calls["n"] >= 3:
                raise training.NonFiniteError("op 'matmul' produced non-finite values")
            return real_backward(loss)

        monkeypatch.setattr(training, "backward", exploding_backward)
        run = train(model, ds, tiny_config(max_epochs=5))
        assert run.aborted is not None and "non-finite" in run.aborted
        assert run.best_params
        assert run.history[0].epoch == 0

    def test_empty_split_rejected(self):
        ds = tiny_dataset()
        ds.test_idx = []
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=9)
        with pytest.raises(ValueError, match="split"):
            train(model, ds, tiny_config())

    def test_density_metric_matches_per_image_recomputation(self):
        ds = tiny_dataset()
        model = build_network2(*DESK_DIMS, n_classes=3, hidden=5, seed=10)
        run = train(model, ds, tiny_config(max_epochs=1, dropout=0.0))
        model.load_snapshot(run.best_params)
        inputs = ds.encoded()
        total, count = 0, 0
        for idx in ds.test_idx:
            capture = {}
            model.forward(Tensor(inputs[idx:idx + 1]), capture=capture)
            total += capture["spikes"].sum()
            count += capture["spikes"].size
        assert run.history[run.best_epoch].spike_density == pytest.approx(total / count, rel=1e-12)


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(patience=0)
        with pytest.raises(ValueError):
            TrainConfig(optimizer="rmsprop")
        with pytest.raises(ValueError):
            TrainConfig(gradient_mode="both")
        with pytest.raises(ValueError):
            TrainConfig(dropout=1.0)
