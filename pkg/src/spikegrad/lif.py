"""Leaky integrate-and-fire layer and its analytics.

The per-step update, with strict inequalities on both step functions:

    V_t = w_input * x_t + (1 - w_leak) * V_{t-1} * [V_{t-1} < v_thresh]
    y_t = [V_t > v_thresh]

A potential at or above threshold zeroes the carried-over term on the next
step (the reset), and a strictly-above-threshold potential emits a spike.
On the tape the spike step uses the straight-through rule and the reset
gate blocks gradients entirely, so backpropagated errors reach exactly the
inputs that contributed to a spike since the previous reset, scaled by
w_input * (1 - w_leak)^n for an input n steps in the past.

This module also carries the closed-form expressions for those gradients
(evaluated from an independent plain-float simulation, they serve as
oracles for the tape) and the firing-rate analytics for constant input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    blocked_step,
    index_axis,
    passthrough_step,
    repeat_rows,
    stack,
)

__all__ = [
    "PhysicalNeuronParams",
    "LifParams",
    "LifState",
    "SpikeRaster",
    "LifOutput",
    "RateAnalytics",
    "physical_to_update_params",
    "lif_forward",
    "simulate_unit",
    "lif_grad_input_closed_form",
    "lif_grad_winput_closed_form",
    "lif_grad_wleak_closed_form",
    "steps_to_spike",
    "min_input",
    "first_spike_step",
]


@dataclass(frozen=True)
class PhysicalNeuronParams:
    """Membrane constants of the underlying RC circuit plus the Euler step."""

    r_m: float
    c_m: float
    dt: float

    def __post_init__(self):
        for name in ("r_m", "c_m", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


class LifParams:
    """Per-neuron update-rule parameters.

    ``w_input`` and ``w_leak`` are vectors with one entry per neuron; they
    may be plain numpy arrays (analytics, simulation) or tape tensors
    (training). ``v_thresh`` is a single shared threshold, 1.0 by default
    since any other scale can be absorbed into w_input.
    """

    def __init__(self, w_input, w_leak, v_thresh: float = 1.0):
        self.w_input = w_input if isinstance(w_input, Tensor) else np.atleast_1d(np.asarray(w_input, dtype=float))
        self.w_leak = w_leak if isinstance(w_leak, Tensor) else np.atleast_1d(np.asarray(w_leak, dtype=float))
        self.v_thresh = float(v_thresh)
        wi, wl = self.input_values, self.leak_values
        if wi.ndim != 1 or wl.ndim != 1 or wi.shape != wl.shape:
            raise ShapeError(f"w_input and w_leak must be matching vectors, got {wi.shape} and {wl.shape}")
        if self.v_thresh <= 0:
            raise ValueError("v_thresh must be strictly positive")
        if np.any(wl < 0) or np.any(wl >= 1):
            raise ValueError("w_leak must lie in [0, 1) elementwise")

    @classmethod
    def single(cls, w_input: float, w_leak: float, v_thresh: float = 1.0) -> "LifParams":
        return cls(np.array([float(w_input)]), np.array([float(w_leak)]), v_thresh)

    @property
    def input_values(self) -> np.ndarray:
        w = self.w_input
        return np.asarray(w.data if isinstance(w, Tensor) else w, dtype=float)

    @property
    def leak_values(self) -> np.ndarray:
        w = self.w_leak
        return np.asarray(w.data if isinstance(w, Tensor) else w, dtype=float)

    @property
    def n_neurons(self) -> int:
        return int(self.input_values.shape[0])

    def scalars(self) -> tuple[float, float, float]:
        """(w_input, w_leak, v_thresh) for a single-neuron parameter set."""
        wi, wl = self.input_values, self.leak_values
        if wi.size != 1:
            raise ValueError(f"analytics need single-neuron params, got {wi.size} neurons")
        return float(wi[0]), float(wl[0]), self.v_thresh

    def __repr__(self):
        return f"LifParams(n={self.n_neurons}, v_thresh={self.v_thresh})"


@dataclass
class LifState:
    """Carried membrane potential, one scalar per neuron."""

    v: np.ndarray


@dataclass
class SpikeRaster:
    """Boolean spike matrix, neurons x timesteps, with optional potential trace."""

    spikes: np.ndarray
    trace: np.ndarray | None = None

    def __post_init__(self):
        self.spikes = np.asarray(self.spikes).astype(bool)
        if self.spikes.ndim != 2:
            raise ShapeError(f"raster must be 2-d (neurons x timesteps), got {self.spikes.shape}")
        if self.trace is not None:
            self.trace = np.asarray(self.trace, dtype=float)
            if self.trace.shape != self.spikes.shape:
                raise ShapeError(f"trace shape {self.trace.shape} does not match raster {self.spikes.shape}")

    @property
    def n_neurons(self) -> int:
        return self.spikes.shape[0]

    @property
    def timesteps(self) -> int:
        return self.spikes.shape[1]

    @property
    def density(self) -> float:
        return float(self.spikes.mean())


@dataclass
class RateAnalytics:
    """Closed-form steps-to-spike result; ``n_steps`` is None when the input
    can never drive the potential to threshold."""

    n_steps: int | None
    i_min: float

    @property
    def diverges(self) -> bool:
        return self.n_steps is None


@dataclass
class LifOutput:
    """Tape-recorded layer output: float 0/1 spikes and optional potentials,
    both shaped [batch, timesteps, neurons]."""

    spikes: Tensor
    trace: Tensor | None = None

    def raster(self, item: int = 0) -> SpikeRaster:
        """Boolean export view (neurons x timesteps) for one batch item."""
        spikes = self.spikes.data[item].T > 0.5
        trace = self.trace.data[item].T.copy() if self.trace is not None else None
        return SpikeRaster(spikes, trace)


def physical_to_update_params(p: PhysicalNeuronParams) -> LifParams:
    """Convert membrane constants to update-rule weights.

    w_input = dt / c_m and w_leak = dt / (r_m * c_m); the threshold is
    normalized to 1. A leak fraction of 1 or more means the Euler step
    discards the whole carried potential, so it is rejected.
    """
    w_input = p.dt / p.c_m
    w_leak = p.dt / (p.r_m * p.c_m)
    if w_leak >= 1.0:
        raise ValueError("timestep too large for stable Euler decay (w_leak >= 1)")
    return LifParams.single(w_input, w_leak, 1.0)


def lif_forward(x, params: LifParams, record_trace: bool = False, surrogate: bool = True) -> LifOutput:
    """Run the spiking layer over a [batch, timesteps, neurons] input.

    The recursion is built from tape ops, so `backward` on anything
    downstream applies the straight-through spike rule and the blocked
    reset rule automatically. ``surrogate=False`` swaps the spike step for
    the blocked variant (identical forward, zero gradient), which is the
    control mode where no error can cross the layer.

    The initial potential is zero for every neuron; potentials are kept
    only when ``record_trace`` is set.
    """
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    if x.ndim != 3:
        raise ShapeError(f"lif_forward expects [batch, timesteps, neurons], got {x.shape}")
    batch, steps, n = x.shape
    if params.n_neurons != n:
        raise ShapeError(f"params cover {params.n_neurons} neurons but input has {n}")

    w_input = params.w_input if isinstance(params.w_input, Tensor) else Tensor(params.input_values)
    w_leak = params.w_leak if isinstance(params.w_leak, Tensor) else Tensor(params.leak_values)
    v_thresh = params.v_thresh
    spike_step = passthrough_step if surrogate else blocked_step

    drive_rows = repeat_rows(w_input, batch)
    decay_rows = repeat_rows(1.0 - w_leak, batch)

    v = None
    spikes = []
    potentials = []
    for t in range(steps):
        x_t = index_axis(x, 1, t)
        drive = drive_rows * x_t
        if v is None:
            v = drive
        else:
            keep = blocked_step(v_thresh - v)
            v = drive + decay_rows * v * keep
        spikes.append(spike_step(v - v_thresh))
        if record_trace:
            potentials.append(v)

    out = stack(spikes, axis=1)
    trace = stack(potentials, axis=1) if record_trace else None
    return LifOutput(out, trace)


def simulate_unit(x_seq, w_input: float, w_leak: float, v_thresh: float = 1.0):
    """Plain-float reference simulation of one neuron.

    Independent of the tape; returns (potentials, spikes) arrays over the
    sequence. This is the oracle the taped layer is tested against and the
    backbone of the closed-form gradient evaluations.
    """
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    v = 0.0
    potentials = np.empty(len(xs))
    spikes = np.zeros(len(xs), dtype=bool)
    for t, x_t in enumerate(xs):
        carry = v if v < v_thresh else 0.0
        v = w_input * x_t + (1.0 - w_leak) * carry
        potentials[t] = v
        spikes[t] = v > v_thresh
    return potentials, spikes


def _unit_potentials(x_seq, params: LifParams):
    w_input, w_leak, v_thresh = params.scalars()
    potentials, _ = simulate_unit(x_seq, w_input, w_leak, v_thresh)
    return potentials, w_input, w_leak, v_thresh


def lif_grad_input_closed_form(x_seq, params: LifParams, t: int, n: int) -> float:
    """Closed-form d y_t / d x_{t-n} for a single neuron.

    Equals w_input * (1 - w_leak)^n while every potential strictly between
    the two timesteps stayed below threshold; any reset inside the window
    blocks the path and the derivative is exactly zero.
    """
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    if not 0 <= t < len(xs):
        raise IndexError(f"t={t} outside sequence of length {len(xs)}")
    if n < 0 or t - n < 0:
        raise IndexError(f"t-n={t - n} is before the start of the sequence")
    potentials, w_input, w_leak, v_thresh = _unit_potentials(xs, params)
    for i in range(1, n + 1):
        if not potentials[t - i] < v_thresh:
            return 0.0
    return w_input * (1.0 - w_leak) ** n


def lif_grad_winput_closed_form(x_seq, params: LifParams, t: int) -> float:
    """Closed-form d y_t / d w_input for a single neuron: x_t plus every
    earlier input discounted by (1 - w_leak)^n, truncated at the most
    recent reset."""
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    if not 0 <= t < len(xs):
        raise IndexError(f"t={t} outside sequence of length {len(xs)}")
    potentials, _, w_leak, v_thresh = _unit_potentials(xs, params)
    total = xs[t]
    decay = 1.0
    for n in range(1, t + 1):
        if not potentials[t - n] < v_thresh:
            break
        decay *= 1.0 - w_leak
        total += xs[t - n] * decay
    return float(total)


def lif_grad_wleak_closed_form(x_seq, params: LifParams, t: int) -> float:
    """Closed-form d y_t / d w_leak for a single neuron: minus the sum of
    carried potentials discounted by (1 - w_leak)^(n-1), truncated at the
    most recent reset. The first step carries no potential, so the value at
    t = 0 is zero."""
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    if not 0 <= t < len(xs):
        raise IndexError(f"t={t} outside sequence of length {len(xs)}")
    if t == 0:
        return 0.0
    potentials, _, w_leak, v_thresh = _unit_potentials(xs, params)
    total = 0.0
    decay = 1.0
    for n in range(1, t + 1):
        if not potentials[t - n] < v_thresh:
            break
        total -= potentials[t - n] * decay
        decay *= 1.0 - w_leak
    return float(total)


def min_input(params: LifParams) -> float:
    """Smallest constant input that can ever drive the neuron to threshold:
    v_thresh * w_leak / w_input. Zero for a leak-free neuron."""
    w_input, w_leak, v_thresh = params.scalars()
    if w_input <= 0:
        raise ValueError("w_input must be strictly positive")
    return v_thresh * w_leak / w_input


def _ceil_guard(value: float, eps: float = 1e-9) -> int:
    # values a hair above an integer are float noise from log/div; snap down
    return int(math.ceil(value - eps))


def steps_to_spike(i: float, params: LifParams) -> RateAnalytics:
    """Closed-form number of update steps a constant input needs to spike.

    The count starts from the already-charged state V = w_input * i and
    uses the reach-or-exceed criterion of the geometric-series derivation,
    so a full simulation from V = 0 first crosses threshold after
    ``n_steps + 1`` integration steps. For w_leak == 0 the value follows
    the simplified expression ceil(v_thresh / (w_input * i)), which under
    the same criterion equals the total number of integration steps from
    V = 0 (one more than the charged-state count); `first_spike_step`
    documents the same pairing from the simulation side.

    Inputs at or below `min_input` never reach threshold and are reported
    as divergent. Inputs within one part in 10^9 of that boundary are also
    reported divergent: float arithmetic cannot separate them from the
    boundary itself, where the potential only approaches threshold
    asymptotically.
    """
    if i <= 0:
        raise ValueError("constant input must be strictly positive")
    w_input, w_leak, v_thresh = params.scalars()
    i_min = min_input(params)
    if i <= i_min * (1.0 + 1e-9):
        return RateAnalytics(None, i_min)
    if w_leak == 0.0:
        n = _ceil_guard(v_thresh / (w_input * i))
    else:
        ratio = math.log(1.0 - (v_thresh / i) * (w_leak / w_input)) / math.log(1.0 - w_leak)
        n = max(0, _ceil_guard(ratio - 1.0))
    return RateAnalytics(n, i_min)


def first_spike_step(i: float, params: LifParams, max_steps: int = 1_000_000, tol: float = 1e-9) -> int | None:
    """Brute-force first spike time under constant input, counted in total
    integration steps from V = 0 (so the first step lands on the charged
    state V = w_input * i). Uses the reach-or-exceed criterion with a tiny
    tolerance absorbing float roundoff; returns None when no spike occurs
    within ``max_steps``. Relative to `steps_to_spike` this returns
    ``n_steps + 1`` for leaky neurons and ``n_steps`` for w_leak == 0.
    """
    if i <= 0:
        raise ValueError("constant input must be strictly positive")
    w_input, w_leak, v_thresh = params.scalars()
    v = 0.0
    target = v_thresh - tol
    drive = w_input * i
    decay = 1.0 - w_leak
    for step in range(1, max_steps + 1):
        v = drive + decay * v
        if v >= target:
            return step
    return None
