"""Scratch calibration for the desk-scale comparison experiment (not part of the package)."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from spikegrad.data import generate_synthetic
from spikegrad.training import TrainConfig, build_network2, train

SEEDS = [0, 1]
LR = float(sys.argv[1]) if len(sys.argv) > 1 else 0.005
EPOCHS = int(sys.argv[2]) if len(sys.argv) > 2 else 8
PER_CLASS = int(sys.argv[3]) if len(sys.argv) > 3 else 100

results = {}
for seed in SEEDS:
    ds = generate_synthetic(10, PER_CLASS, dims=(32, 40, 3), seed=seed)
    for mode in ("surrogate", "disabled"):
        model = build_network2(32, 40, 3, n_classes=10, hidden=30, dropout_rate=0.3,
                               seed=seed, gradient_mode=mode)
        config = TrainConfig(learning_rate=LR, optimizer="adam", batch_size=8,
                             max_epochs=EPOCHS, patience=EPOCHS, seed=seed,
                             gradient_mode=mode, dropout=0.3)
        t0 = time.time()
        run = train(model, ds, config)
        dt = time.time() - t0
        accs = [round(m.test_accuracy, 4) for m in run.history]
        dens = [round(m.spike_density, 4) for m in run.history]
        results[(seed, mode)] = run.best_test_accuracy
        print(f"seed={seed} mode={mode:9s} best={run.best_test_accuracy:.4f} "
              f"time={dt:.1f}s ({dt / max(1, len(run.history) - 1):.2f}s/epoch)")
        print(f"   acc history: {accs}")
        print(f"   density:     {dens}")

gaps = [results[(s, 'surrogate')] - results[(s, 'disabled')] for s in SEEDS]
print(f"gaps: {[round(g, 4) for g in gaps]}  mean={np.mean(gaps):.4f}")
