"""Dataset-design scan for the comparison gap (not part of the package)."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from spikegrad.data import generate_synthetic
from spikegrad.training import TrainConfig, build_network2, train

AMP = float(sys.argv[1])
NOISE = float(sys.argv[2])
EPOCHS = int(sys.argv[3]) if len(sys.argv) > 3 else 15
LR = float(sys.argv[4]) if len(sys.argv) > 4 else 0.005
SEED = int(sys.argv[5]) if len(sys.argv) > 5 else 0

ds = generate_synthetic(10, 50, dims=(32, 40, 3), seed=SEED, amplitude=AMP, noise=NOISE)
out = {}
for mode in ("surrogate", "disabled"):
    model = build_network2(32, 40, 3, n_classes=10, hidden=30, dropout_rate=0.3,
                           seed=SEED, gradient_mode=mode)
    config = TrainConfig(learning_rate=LR, optimizer="adam", batch_size=8,
                         max_epochs=EPOCHS, patience=EPOCHS, seed=SEED,
                         gradient_mode=mode, dropout=0.3)
    t0 = time.time()
    run = train(model, ds, config)
    dt = time.time() - t0
    out[mode] = run.best_test_accuracy
    accs = [round(m.test_accuracy, 3) for m in run.history]
    dens = [round(m.spike_density, 3) for m in run.history]
    print(f"amp={AMP} noise={NOISE} lr={LR} {mode:9s} best={run.best_test_accuracy:.3f} @ep{run.best_epoch} {dt:.0f}s")
    print(f"   acc:  {accs}")
    print(f"   dens: {dens}")
print(f"GAP = {out['surrogate'] - out['disabled']:+.3f}")
