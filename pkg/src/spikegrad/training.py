"""Loss, metrics, optimizers, the seeded training loop, and the two hybrid
network builders.

The images-as-sequences convention: the encoder (see `spikegrad.data`)
turns an image into [timesteps = columns, rows * channels], and both
architectures consume batches shaped [batch, timesteps, features].

Network 1 puts the spiking layer directly on the pixels with one trainable
(w_input, w_leak) pair per color channel shared across rows, then reads
the spike trains with the recurrent layer and a time-distributed head.
Network 2 inserts a trainable fully-connected layer in front of the
spiking layer (per-neuron spiking parameters), same tail. The
``gradient_mode`` switch flips the spike step between the straight-through
rule and the blocked rule; with the blocked rule no error can reach the
spiking layer's parameters or anything before it.

Seed derivation (all streams come from the one config seed):
[seed, 0] parameter init, [seed, 1] dropout, [seed, 2] epoch shuffling,
[seed, 3] synthetic data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .layers import Dense, Dropout, LifLayer, Lstm, Model
from .tensor import NonFiniteError, Tensor, backward, no_grad

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "TrainRun",
    "OptimizerError",
    "cross_entropy_time_distributed",
    "accuracy_time_averaged",
    "confusion_counts",
    "Sgd",
    "Adam",
    "make_optimizer",
    "train",
    "evaluate",
    "build_network1",
    "build_network2",
]

OPTIMIZERS = ("sgd", "adam")
GRADIENT_MODES = ("surrogate", "disabled")


class OptimizerError(RuntimeError):
    """A parameter update received a non-finite gradient."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    optimizer: str = "adam"
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 30
    seed: int = 0
    gradient_mode: str = "surrogate"
    dropout: float = 0.3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}, got {self.gradient_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class EpochMetrics:
    """Epoch 0 is the untouched model; later rows follow that epoch's updates.
    Accuracies, the mean train-split loss, and spike density are all measured
    in evaluation mode (dropout off). Density averages over the model's
    spiking layers on the test split."""

    epoch: int
    train_accuracy: float
    test_accuracy: float
    mean_loss: float
    spike_density: float


@dataclass
class TrainRun:
    config: TrainConfig
    history: list[EpochMetrics] = field(default_factory=list)
    best_epoch: int = 0
    best_test_accuracy: float = 0.0
    best_params: dict = field(default_factory=dict)
    aborted: str | None = None


def cross_entropy_time_distributed(probs: Tensor, labels) -> Tensor:
    """Mean over batch and timesteps of -log p_t(correct class).

    ``probs`` must already be normalized (rows summing to one within 1e-6);
    probabilities are floored at 1e-12 before the log.
    """
    if probs.ndim != 3:
        raise T.ShapeError(f"expected probabilities [batch, timesteps, classes], got {probs.shape}")
    batch, steps, classes = probs.shape
    sums = probs.data.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ValueError("probability rows do not sum to 1 within 1e-6")
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if labels.shape[0] != batch:
        raise T.ShapeError(f"got {labels.shape[0]} labels for batch of {batch}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError("label outside class range")
    onehot = np.zeros((batch, classes))
    onehot[np.arange(batch), labels] = 1.0
    mask = Tensor(np.repeat(onehot[:, None, :], steps, axis=1))
    picked = T.log(T.clip_min(probs, 1e-12)) * mask
    return picked.sum() * (-1.0 / (batch * steps))


def accuracy_time_averaged(probs, labels) -> float:
    """Mean over images of the time-averaged probability of the correct
    class. Deliberately conservative: early timesteps, where little of the
    image has been seen, count as much as late ones."""
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    p_correct = arr[np.arange(arr.shape[0]), :, labels]
    return float(p_correct.mean(axis=1).mean())


def confusion_counts(probs, labels, n_classes: int) -> np.ndarray:
    """Counts[true, predicted], where a prediction is the argmax of the
    time-averaged class probabilities."""
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    predictions = arr.mean(axis=1).argmax(axis=1)
    counts = np.zeros((n_classes, n_classes), dtype=int)
    for truth, pred in zip(labels, predictions):
        counts[truth, pred] += 1
    return counts


class Sgd:
    """Plain gradient descent: W <- W - lr * dL/dW."""

    def __init__(self, learning_rate: float):
        self.learning_rate = float(learning_rate)

    def step(self, named_params, grads) -> None:
        for name, param in named_params:
            g = _gradient_for(name, param, grads)
            if g is None:
                continue
            param.data = param.data - self.learning_rate * g


class Adam:
    """Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}

    def step(self, named_params, grads) -> None:
        for name, param in named_params:
            g = _gradient_for(name, param, grads)
            if g is None:
                continue
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(param.data)
                self._v[name] = np.zeros_like(param.data)
                self._t[name] = 0
            v = self._v[name]
            self._t[name] += 1
            t = self._t[name]
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self._m[name], self._v[name] = m, v
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            param.data = param.data - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def _gradient_for(name, param, grads):
    entry = grads.get(param)
    if entry is None:
        return None
    g = entry.data if isinstance(entry, Tensor) else np.asarray(entry)
    if not np.all(np.isfinite(g)):
        raise OptimizerError(f"non-finite gradient for parameter '{name}'")
    return g


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return Sgd(config.learning_rate)
    return Adam(config.learning_rate)


@dataclass
class EvalResult:
    accuracy: float
    mean_loss: float
    spike_density: float
    n_images: int


def evaluate(model: Model, inputs: np.ndarray, labels: np.ndarray, indices, batch_size: int = 32) -> EvalResult:
    """Evaluation-mode pass over the given image indices: time-averaged
    accuracy, mean per-image cross-entropy, spike density."""
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        raise ValueError("empty evaluation set")
    acc_sum = 0.0
    nll_sum = 0.0
    spike_sum = 0
    spike_count = 0
    with no_grad():
        for start in range(0, indices.size, batch_size):
            batch_idx = indices[start:start + batch_size]
            capture: dict = {}
            probs = model.forward(Tensor(np.ascontiguousarray(inputs[batch_idx])),
                                  training=False, capture=capture).data
            yb = labels[batch_idx]
            p_correct = probs[np.arange(len(batch_idx)), :, yb]
            acc_sum += float(p_correct.mean(axis=1).sum())
            nll_sum += float((-np.log(np.maximum(p_correct, 1e-12))).mean(axis=1).sum())
            if "spikes" in capture:
                spike_sum += int(capture["spikes"].sum())
                spike_count += capture["spikes"].size
    n = int(indices.size)
    density = spike_sum / spike_count if spike_count else 0.0
    return EvalResult(acc_sum / n, nll_sum / n, density, n)


def train(model: Model, dataset, config: TrainConfig) -> TrainRun:
    """Seeded training loop with early stopping on test accuracy.

    Epoch 0 of the history is the model before any update. Each later
    epoch shuffles the train split (seeded), runs batched updates, clamps
    the spiking parameters, then records evaluation-mode metrics on both
    splits. The best row is the one with the strictly highest test
    accuracy so far; training stops once ``patience`` epochs pass without
    a new best, or at ``max_epochs``. A non-finite loss or gradient aborts
    the run, keeping the best checkpoint reached so far.
    """
    inputs = dataset.encoded()
    labels = dataset.labels
    train_idx = np.asarray(dataset.train_idx, dtype=int)
    test_idx = np.asarray(dataset.test_idx, dtype=int)
    if train_idx.size == 0 or test_idx.size == 0:
        raise ValueError("dataset must provide non-empty train and test splits")

    model.set_gradient_mode(config.gradient_mode)
    optimizer = make_optimizer(config)
    named_params = model.parameters()
    shuffle_rng = np.random.default_rng([config.seed, 2])

    run = TrainRun(config=config)
    ev_train = evaluate(model, inputs, labels, train_idx, config.batch_size)
    ev_test = evaluate(model, inputs, labels, test_idx, config.batch_size)
    run.history.append(EpochMetrics(0, ev_train.accuracy, ev_test.accuracy,
                                    ev_train.mean_loss, ev_test.spike_density))
    run.best_epoch = 0
    run.best_test_accuracy = ev_test.accuracy
    run.best_params = model.snapshot()

    for epoch in range(1, config.max_epochs + 1):
        order = train_idx[shuffle_rng.permutation(train_idx.size)]
        try:
            for start in range(0, order.size, config.batch_size):
                batch_idx = order[start:start + config.batch_size]
                probs = model.forward(Tensor(np.ascontiguousarray(inputs[batch_idx])), training=True)
                loss = cross_entropy_time_distributed(probs, labels[batch_idx])
                grads = backward(loss)
                optimizer.step(named_params, grads)
                model.clamp_spiking_params()
        except (NonFiniteError, OptimizerError) as err:
            run.aborted = f"epoch {epoch}: {err}"
            break
        ev_train = evaluate(model, inputs, labels, train_idx, config.batch_size)
        ev_test = evaluate(model, inputs, labels, test_idx, config.batch_size)
        run.history.append(EpochMetrics(epoch, ev_train.accuracy, ev_test.accuracy,
                                        ev_train.mean_loss, ev_test.spike_density))
        if ev_test.accuracy > run.best_test_accuracy:
            run.best_test_accuracy = ev_test.accuracy
            run.best_epoch = epoch
            run.best_params = model.snapshot()
        if epoch - run.best_epoch >= config.patience:
            break
    return run


def _tail_layers(dim: int, hidden: int, n_classes: int, dropout_rate: float,
                 rng_init: np.random.Generator, rng_drop: np.random.Generator):
    return [
        Lstm(dim, hidden, rng_init, name="lstm"),
        Dropout(dropout_rate, rng_drop, name="dropout1"),
        Dense(hidden, hidden, "tanh", rng_init, name="dense"),
        Dropout(dropout_rate, rng_drop, name="dropout2"),
        Dense(hidden, n_classes, "softmax", rng_init, name="softmax"),
    ]


def build_network1(rows: int, cols: int, channels: int, n_classes: int = 10,
                   hidden: int = 30, dropout_rate: float = 0.3, seed: int = 0,
                   gradient_mode: str = "surrogate") -> Model:
    """Spiking layer on raw pixels (one parameter pair per channel, shared
    across rows), then the recurrent readout and time-distributed head."""
    if min(rows, cols, channels, n_classes, hidden) < 1:
        raise ValueError("all dimensions must be positive")
    rng_init = np.random.default_rng([seed, 0])
    rng_drop = np.random.default_rng([seed, 1])
    dim = rows * channels
    layers = [LifLayer(dim, rng_init, n_param_sets=channels, name="lif")]
    layers += _tail_layers(dim, hidden, n_classes, dropout_rate, rng_init, rng_drop)
    model = Model(layers, meta={
        "network": 1, "rows": rows, "cols": cols, "channels": channels,
        "classes": n_classes, "hidden": hidden, "dropout": dropout_rate, "seed": seed,
    })
    model.set_gradient_mode(gradient_mode)
    return model


def build_network2(rows: int, cols: int, channels: int, n_classes: int = 10,
                   hidden: int = 30, dropout_rate: float = 0.3, seed: int = 0,
                   gradient_mode: str = "surrogate", encoder_bias: float = 0.4) -> Model:
    """Trainable fully-connected layer in front of a per-neuron spiking
    layer, then the same recurrent readout and head as network 1.

    The encoder bias starts positive so every spiking unit is active at
    initialization; training starts from a dense spike code and is free to
    prune it, which is where the sparsening of the code during training
    comes from.
    """
    if min(rows, cols, channels, n_classes, hidden) < 1:
        raise ValueError("all dimensions must be positive")
    rng_init = np.random.default_rng([seed, 0])
    rng_drop = np.random.default_rng([seed, 1])
    dim = rows * channels
    layers = [
        Dense(dim, dim, "identity", rng_init, name="encoder", bias_init=encoder_bias),
        LifLayer(dim, rng_init, name="lif"),
    ]
    layers += _tail_layers(dim, hidden, n_classes, dropout_rate, rng_init, rng_drop)
    model = Model(layers, meta={
        "network": 2, "rows": rows, "cols": cols, "channels": channels,
        "classes": n_classes, "hidden": hidden, "dropout": dropout_rate, "seed": seed,
    })
    model.set_gradient_mode(gradient_mode)
    return model


def build_network(network: int, rows: int, cols: int, channels: int, **kwargs) -> Model:
    if network == 1:
        return build_network1(rows, cols, channels, **kwargs)
    if network == 2:
        return build_network2(rows, cols, channels, **kwargs)
    raise ValueError(f"network must be 1 or 2, got {network}")
