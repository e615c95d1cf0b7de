"""Trainable layers and the model container.

Dense layers apply to 2-d inputs directly and to 3-d [batch, timesteps,
features] inputs per timestep (time-distributed, via reshape). The
recurrent readout is a standard gated (LSTM-style) cell unrolled over the
sequence, returning the full hidden sequence. Dropout is active only when
``training`` is set. The spiking layer wraps `lif_forward` with trainable
per-neuron parameters, optionally shared cyclically across neurons (one
parameter pair per color channel, for instance).
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .lif import LifParams, lif_forward
from .tensor import ShapeError, Tensor

__all__ = ["Dense", "Lstm", "Dropout", "LifLayer", "Model", "glorot_uniform"]

ACTIVATIONS = ("identity", "sigmoid", "tanh", "softmax")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Dense:
    """Fully-connected layer, x @ W + b followed by an activation."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, name: str = "dense",
                 bias_init: float = 0.0):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.activation = activation
        self.name = name
        self.weights = Tensor(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.full(out_dim, float(bias_init)), requires_grad=True)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        if x.ndim == 3:
            batch, steps, dim = x.shape
            flat = T.reshape(x, (batch * steps, dim))
            out = self._apply(flat)
            return T.reshape(out, (batch, steps, self.out_dim))
        return self._apply(x)

    def _apply(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"{self.name}: expected feature size {self.in_dim}, got input shape {x.shape}")
        z = T.matmul(x, self.weights) + T.repeat_rows(self.bias, x.shape[0])
        if self.activation == "sigmoid":
            return T.sigmoid(z)
        if self.activation == "tanh":
            return T.tanh(z)
        if self.activation == "softmax":
            return T.softmax(z, axis=-1)
        return z

    def parameters(self):
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.bias", self.bias)]

    def parameter_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


class Lstm:
    """Gated recurrent readout returning the full hidden sequence.

    Packed gate layout along the last weight axis: input, forget,
    candidate, output. The forget-gate bias starts at 1.0.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator | None = None,
                 name: str = "lstm"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = int(in_dim)
        self.hidden = int(hidden)
        self.name = name
        self.w_x = Tensor(glorot_uniform(rng, in_dim, hidden, (in_dim, 4 * hidden)), requires_grad=True)
        self.w_h = Tensor(glorot_uniform(rng, hidden, hidden, (hidden, 4 * hidden)), requires_grad=True)
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0
        self.bias = Tensor(bias, requires_grad=True)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected [batch, timesteps, features], got {x.shape}")
        batch, steps, dim = x.shape
        if dim != self.in_dim:
            raise ShapeError(f"{self.name}: expected feature size {self.in_dim}, got input shape {x.shape}")
        hsize = self.hidden
        h = Tensor(np.zeros((batch, hsize)))
        c = Tensor(np.zeros((batch, hsize)))
        bias_rows = T.repeat_rows(self.bias, batch)
        outputs = []
        for t in range(steps):
            x_t = T.index_axis(x, 1, t)
            z = T.matmul(x_t, self.w_x) + T.matmul(h, self.w_h) + bias_rows
            gate_in = T.sigmoid(T.slice_axis(z, 1, 0, hsize))
            gate_forget = T.sigmoid(T.slice_axis(z, 1, hsize, 2 * hsize))
            candidate = T.tanh(T.slice_axis(z, 1, 2 * hsize, 3 * hsize))
            gate_out = T.sigmoid(T.slice_axis(z, 1, 3 * hsize, 4 * hsize))
            c = gate_forget * c + gate_in * candidate
            h = gate_out * T.tanh(c)
            outputs.append(h)
        return T.stack(outputs, axis=1)

    def parameters(self):
        return [
            (f"{self.name}.w_x", self.w_x),
            (f"{self.name}.w_h", self.w_h),
            (f"{self.name}.bias", self.bias),
        ]

    def parameter_count(self) -> int:
        return 4 * self.hidden * (self.in_dim + self.hidden + 1)


class Dropout:
    """Inverted dropout; identity outside training and for rate zero."""

    def __init__(self, rate: float, rng: np.random.Generator | None = None, name: str = "dropout"):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.name = name

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        if not training or self.rate == 0.0:
            return x
        keep = self.rng.random(x.shape) >= self.rate
        mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * Tensor(mask)

    def parameters(self):
        return []

    def parameter_count(self) -> int:
        return 0


class LifLayer:
    """Spiking layer with trainable per-neuron input and leak weights.

    ``n_param_sets`` shares one (w_input, w_leak) pair cyclically over the
    neurons: with k sets, neuron i uses set i mod k. This matches a
    row-major, channel-minor feature layout where one set per channel is
    shared across all rows.
    """

    W_INPUT_INIT = (0.3, 0.7)
    W_LEAK_INIT = (0.05, 0.15)
    W_INPUT_FLOOR = 1e-6
    W_LEAK_CEIL = 1.0 - 1e-6

    def __init__(self, n_neurons: int, rng: np.random.Generator | None = None,
                 n_param_sets: int | None = None, v_thresh: float = 1.0,
                 surrogate: bool = True, name: str = "lif"):
        rng = rng if rng is not None else np.random.default_rng(0)
        sets = int(n_param_sets) if n_param_sets else int(n_neurons)
        if n_neurons % sets:
            raise ValueError(f"n_param_sets {sets} must divide n_neurons {n_neurons}")
        self.n_neurons = int(n_neurons)
        self.reps = n_neurons // sets
        self.v_thresh = float(v_thresh)
        self.surrogate = bool(surrogate)
        self.name = name
        self.w_input = Tensor(rng.uniform(*self.W_INPUT_INIT, size=sets), requires_grad=True)
        self.w_leak = Tensor(rng.uniform(*self.W_LEAK_INIT, size=sets), requires_grad=True)

    def forward(self, x: Tensor, training: bool = False, record_trace: bool = False):
        w_in = T.tile_vector(self.w_input, self.reps) if self.reps > 1 else self.w_input
        w_lk = T.tile_vector(self.w_leak, self.reps) if self.reps > 1 else self.w_leak
        params = LifParams(w_in, w_lk, self.v_thresh)
        return lif_forward(x, params, record_trace=record_trace, surrogate=self.surrogate)

    def clamp(self) -> None:
        """Post-optimizer projection keeping the update rule well-defined."""
        np.clip(self.w_input.data, self.W_INPUT_FLOOR, None, out=self.w_input.data)
        np.clip(self.w_leak.data, 0.0, self.W_LEAK_CEIL, out=self.w_leak.data)

    def params_view(self) -> LifParams:
        """Materialized per-neuron parameters (tiled, detached from the tape)."""
        wi = np.tile(self.w_input.data, self.reps)
        wl = np.tile(self.w_leak.data, self.reps)
        return LifParams(wi, wl, self.v_thresh)

    def parameters(self):
        return [(f"{self.name}.w_input", self.w_input), (f"{self.name}.w_leak", self.w_leak)]

    def parameter_count(self) -> int:
        return 2 * self.w_input.size


class Model:
    """Ordered layer stack ending in a softmax head.

    ``meta`` records the architecture (network id, image dims, classes,
    hidden size, seed) so checkpoints can rebuild the exact model. The
    spiking layers are tracked for gradient-mode switching and post-step
    clamping.
    """

    def __init__(self, layers: list, meta: dict):
        self.layers = list(layers)
        self.meta = dict(meta)

    def forward(self, x, training: bool = False, capture: dict | None = None) -> Tensor:
        record = capture is not None
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
        for layer in self.layers:
            if isinstance(layer, LifLayer):
                out = layer.forward(h, training=training, record_trace=record)
                if record:
                    capture["spikes"] = out.spikes.data.copy()
                    capture["potential"] = out.trace.data.copy()
                h = out.spikes
            else:
                h = layer.forward(h, training=training)
                if record and isinstance(layer, Lstm):
                    capture["hidden"] = h.data.copy()
        if record:
            capture["probs"] = h.data.copy()
        return h

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = []
        for layer in self.layers:
            named.extend(layer.parameters())
        return named

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def lif_layers(self) -> list[LifLayer]:
        return [l for l in self.layers if isinstance(l, LifLayer)]

    def set_gradient_mode(self, mode: str) -> None:
        if mode not in ("surrogate", "disabled"):
            raise ValueError(f"gradient mode must be 'surrogate' or 'disabled', got {mode!r}")
        for layer in self.lif_layers():
            layer.surrogate = mode == "surrogate"

    @property
    def gradient_mode(self) -> str:
        lifs = self.lif_layers()
        return "surrogate" if (not lifs or lifs[0].surrogate) else "disabled"

    def clamp_spiking_params(self) -> None:
        for layer in self.lif_layers():
            layer.clamp()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.parameters()}

    def load_snapshot(self, params: dict[str, np.ndarray]) -> None:
        own = dict(self.parameters())
        missing = sorted(set(own) - set(params))
        if missing:
            raise KeyError(f"snapshot is missing parameters: {missing}")
        for name, tensor in own.items():
            arr = np.asarray(params[name], dtype=tensor.dtype)
            if arr.shape != tensor.shape:
                raise ShapeError(f"parameter {name}: snapshot shape {arr.shape} vs model {tensor.shape}")
            tensor.data = arr.copy()
