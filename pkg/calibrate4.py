"""Runaway diagnosis: parameter norms during dense-start training (scratch)."""

import sys

import numpy as np

sys.path.insert(0, "src")

from spikegrad.data import generate_synthetic
from spikegrad.tensor import Tensor, backward
from spikegrad.training import (TrainConfig, build_network2, cross_entropy_time_distributed,
                                evaluate, make_optimizer)

BASE = float(sys.argv[1]) if len(sys.argv) > 1 else 0.7
LR = float(sys.argv[2]) if len(sys.argv) > 2 else 0.002

ds = generate_synthetic(10, 50, dims=(32, 40, 3), seed=0, amplitude=0.3, noise=0.05,
                        distractor=0.35, baseline=BASE)
model = build_network2(32, 40, 3, n_classes=10, hidden=30, seed=0, gradient_mode="surrogate")
config = TrainConfig(learning_rate=LR, max_epochs=1, patience=5, seed=0)
opt = make_optimizer(config)
named = model.parameters()
X, y = ds.encoded(), ds.labels
train_idx = np.asarray(ds.train_idx)
rng = np.random.default_rng([0, 2])

enc_w = dict(named)["encoder.weights"]
enc_b = dict(named)["encoder.bias"]
wi = dict(named)["lif.w_input"]
wl = dict(named)["lif.w_leak"]

for epoch in range(8):
    order = train_idx[rng.permutation(train_idx.size)]
    for start in range(0, order.size, 8):
        b = order[start:start + 8]
        probs = model.forward(Tensor(np.ascontiguousarray(X[b])), training=True)
        loss = cross_entropy_time_distributed(probs, y[b])
        opt.step(named, backward(loss))
        model.clamp_spiking_params()
    ev = evaluate(model, X, y, ds.test_idx, 32)
    print(f"ep{epoch + 1}: acc={ev.accuracy:.3f} dens={ev.spike_density:.3f} "
          f"|encW|={np.abs(enc_w.data).mean():.4f} encB mean={enc_b.data.mean():+.4f} "
          f"w_in mean={wi.data.mean():.3f} w_leak mean={wl.data.mean():.3f}")
