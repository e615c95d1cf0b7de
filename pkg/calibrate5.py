"""Stability scan over baseline/dropout/batch/lr (scratch)."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from spikegrad.data import generate_synthetic
from spikegrad.training import TrainConfig, build_network2, train

BASE = float(sys.argv[1])
DROP = float(sys.argv[2])
BATCH = int(sys.argv[3])
LR = float(sys.argv[4])
EPOCHS = int(sys.argv[5]) if len(sys.argv) > 5 else 20
SEED = int(sys.argv[6]) if len(sys.argv) > 6 else 0

ds = generate_synthetic(10, 50, dims=(32, 40, 3), seed=SEED, amplitude=0.3, noise=0.05,
                        distractor=0.35, baseline=BASE)
out = {}
for mode in ("surrogate", "disabled"):
    model = build_network2(32, 40, 3, n_classes=10, hidden=30, dropout_rate=DROP,
                           seed=SEED, gradient_mode=mode)
    config = TrainConfig(learning_rate=LR, optimizer="adam", batch_size=BATCH,
                         max_epochs=EPOCHS, patience=EPOCHS, seed=SEED,
                         gradient_mode=mode, dropout=DROP)
    t0 = time.time()
    run = train(model, ds, config)
    dt = time.time() - t0
    out[mode] = run
    accs = [round(m.test_accuracy, 3) for m in run.history]
    dens = [round(m.spike_density, 3) for m in run.history]
    print(f"base={BASE} drop={DROP} batch={BATCH} lr={LR} {mode:9s} "
          f"best={run.best_test_accuracy:.3f} @ep{run.best_epoch} {dt:.0f}s")
    print(f"   acc:  {accs}")
    print(f"   dens: {dens}")
sur, dis = out["surrogate"], out["disabled"]
d0 = sur.history[0].spike_density
dbest = sur.history[sur.best_epoch].spike_density
print(f"GAP={sur.best_test_accuracy - dis.best_test_accuracy:+.3f} "
      f"dens0={d0:.3f} densBest={dbest:.3f} sparser={dbest < d0}")
