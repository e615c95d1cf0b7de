"""Shared independent oracles used by the unit and acceptance suites."""

from fractions import Fraction

import numpy as np

from spikegrad.lif import LifParams
from spikegrad.tensor import Tensor, backward
from spikegrad import lif


def exact_first_spike_total_steps(w_input, w_leak, i, v_thresh=Fraction(1), max_steps=100_000):
    """Total integration steps from V = 0 until V >= v_thresh, in exact
    rational arithmetic. Returns None if threshold is never reached."""
    v = Fraction(0)
    drive = Fraction(w_input) * Fraction(i)
    decay = Fraction(1) - Fraction(w_leak)
    for step in range(1, max_steps + 1):
        v = drive + decay * v
        if v >= v_thresh:
            return step
    return None


def rate_grid():
    """The analytics grid as exact fractions: w_input x w_leak x input level."""
    w_inputs = [Fraction(k, 10) for k in range(1, 11)]
    w_leaks = [Fraction(0)] + [Fraction(j, 20) for j in range(1, 11)]
    inputs = [Fraction(m, 10) for m in range(1, 21)]
    for wi in w_inputs:
        for wl in w_leaks:
            for i in inputs:
                yield wi, wl, i


def expected_formula_steps(wi, wl, i, exact_total):
    """Map the exact simulated first-spike step count onto the convention
    of steps_to_spike (charged-state count for leaky neurons, total count
    for leak-free ones)."""
    if wl == 0:
        return exact_total
    return exact_total - 1


def never_spikes_within(w_inputs, w_leaks, inputs, v_thresh=1.0, steps=1_000_000):
    """Vectorized brute-force check that none of the given constant-input
    cells ever spikes (strict criterion, matching the layer) within `steps`
    integration steps."""
    drives = np.asarray(w_inputs, dtype=float) * np.asarray(inputs, dtype=float)
    decays = 1.0 - np.asarray(w_leaks, dtype=float)
    v = np.zeros(len(drives))
    for _ in range(steps):
        v = drives + decays * v
        if np.any(v > v_thresh):
            return False
    return True


def unit_tape_grads(x_seq, params: LifParams, surrogate: bool = True):
    """Tape gradients of sum_t y_t for one neuron: (d/dx array, d/dw_input,
    d/dw_leak)."""
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    w_input, w_leak, v_thresh = params.scalars()
    x = Tensor(xs.reshape(1, -1, 1), requires_grad=True)
    wi = Tensor(np.array([w_input]), requires_grad=True)
    wl = Tensor(np.array([w_leak]), requires_grad=True)
    out = lif.lif_forward(x, LifParams(wi, wl, v_thresh), surrogate=surrogate)
    grads = backward(out.spikes.sum())
    gx = grads[x].data.reshape(-1)
    gwi = grads[wi].item() if wi in grads else 0.0
    gwl = grads[wl].item() if wl in grads else 0.0
    return gx, gwi, gwl


def unit_spike_grad_wrt_input(x_seq, params: LifParams, t: int):
    """Tape gradient of the single output y_t w.r.t. the whole input sequence."""
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    w_input, w_leak, v_thresh = params.scalars()
    x = Tensor(xs.reshape(1, -1, 1), requires_grad=True)
    out = lif.lif_forward(x, LifParams.single(w_input, w_leak, v_thresh))
    y_t = T_index_scalar(out.spikes, t)
    return backward(y_t)[x].data.reshape(-1)


def T_index_scalar(spikes: Tensor, t: int) -> Tensor:
    from spikegrad.tensor import index_axis

    return index_axis(index_axis(index_axis(spikes, 0, 0), 0, t), 0, 0)


def oracle_grad_x_sum(x_seq, params: LifParams):
    """Closed-form d(sum_t y_t)/dx_s for every s, assembled from the
    per-spike expression with reset truncation."""
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    grads = np.zeros(len(xs))
    for s in range(len(xs)):
        total = 0.0
        for t in range(s, len(xs)):
            term = lif.lif_grad_input_closed_form(xs, params, t, t - s)
            if term == 0.0:
                break
            total += term
        grads[s] = total
    return grads


def oracle_grad_winput_sum(x_seq, params: LifParams):
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    return sum(lif.lif_grad_winput_closed_form(xs, params, t) for t in range(len(xs)))


def oracle_grad_wleak_sum(x_seq, params: LifParams):
    xs = np.asarray(x_seq, dtype=float).reshape(-1)
    return sum(lif.lif_grad_wleak_closed_form(xs, params, t) for t in range(len(xs)))


def random_unit_case(rng, max_len=50, leak_max=0.5):
    """Random sequence and single-neuron params for the oracle comparisons."""
    length = int(rng.integers(3, max_len + 1))
    xs = rng.uniform(0.0, 2.0, size=length)
    w_input = float(rng.uniform(0.1, 1.0))
    w_leak = float(rng.uniform(0.0, leak_max))
    return xs, LifParams.single(w_input, w_leak)
