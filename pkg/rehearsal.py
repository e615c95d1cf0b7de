"""Full-scale rehearsal of the comparison experiment (scratch)."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from spikegrad.data import generate_synthetic
from spikegrad.training import TrainConfig, build_network2, train

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 28

t_start = time.time()
results = {}
for seed in range(5):
    ds = generate_synthetic(10, 100, dims=(32, 40, 3), seed=seed)
    for mode in ("surrogate", "disabled"):
        model = build_network2(32, 40, 3, n_classes=10, hidden=30, dropout_rate=0.1,
                               seed=seed, gradient_mode=mode)
        config = TrainConfig(learning_rate=0.001, optimizer="adam", batch_size=16,
                             max_epochs=EPOCHS, patience=EPOCHS, seed=seed,
                             gradient_mode=mode, dropout=0.1)
        t0 = time.time()
        run = train(model, ds, config)
        dt = time.time() - t0
        results[(seed, mode)] = run
        d0 = run.history[0].spike_density
        db = run.history[run.best_epoch].spike_density
        print(f"seed={seed} {mode:9s} best={run.best_test_accuracy:.3f} @ep{run.best_epoch} "
              f"dens0={d0:.3f} densBest={db:.3f} {dt:.0f}s", flush=True)
        print(f"   acc:  {[round(m.test_accuracy, 3) for m in run.history]}", flush=True)
        print(f"   dens: {[round(m.spike_density, 3) for m in run.history]}", flush=True)

gaps, sparser, floors = [], [], []
for seed in range(5):
    sur = results[(seed, "surrogate")]
    dis = results[(seed, "disabled")]
    gaps.append(sur.best_test_accuracy - dis.best_test_accuracy)
    floors.append(min(sur.best_test_accuracy, dis.best_test_accuracy))
    sparser.append(sur.history[sur.best_epoch].spike_density < sur.history[0].spike_density)
print(f"gaps: {[round(g, 3) for g in gaps]} mean={np.mean(gaps):.3f}")
print(f"floors: {[round(f, 3) for f in floors]} (need > 0.10)")
print(f"sparser flags: {sparser} (need >= 4/5)")
print(f"TOTAL {time.time() - t_start:.0f}s")
