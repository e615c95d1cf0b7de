"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The two training-based
criteria share one set of comparison runs (5 seeds x surrogate/disabled on
the synthetic 10-class set), which dominates the suite's runtime.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from helpers import (
    exact_first_spike_total_steps,
    expected_formula_steps,
    never_spikes_within,
    oracle_grad_winput_sum,
    oracle_grad_wleak_sum,
    oracle_grad_x_sum,
    random_unit_case,
    rate_grid,
    unit_spike_grad_wrt_input,
    unit_tape_grads,
)
from spikegrad.cli import main as cli_main
from spikegrad.data import LabeledImage, compression_factor, generate_synthetic
from spikegrad.lif import LifParams, SpikeRaster, simulate_unit, steps_to_spike
from spikegrad.training import (
    TrainConfig,
    build_network1,
    build_network2,
    evaluate,
    train,
)

COMPARISON = dict(classes=10, per_class=100, dims=(32, 40, 3), seeds=(0, 1, 2, 3, 4),
                  learning_rate=0.001, batch_size=16, max_epochs=40, dropout=0.1)


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="session")
def comparison_runs():
    """The 5-seed surrogate/disabled comparison on the synthetic set."""
    started = time.time()
    runs = {}
    for seed in COMPARISON["seeds"]:
        dataset = generate_synthetic(COMPARISON["classes"], COMPARISON["per_class"],
                                     dims=COMPARISON["dims"], seed=seed)
        for mode in ("surrogate", "disabled"):
            model = build_network2(*COMPARISON["dims"], n_classes=COMPARISON["classes"],
                                   hidden=30, dropout_rate=COMPARISON["dropout"],
                                   seed=seed, gradient_mode=mode)
            config = TrainConfig(learning_rate=COMPARISON["learning_rate"],
                                 optimizer="adam", batch_size=COMPARISON["batch_size"],
                                 max_epochs=COMPARISON["max_epochs"],
                                 patience=COMPARISON["max_epochs"], seed=seed,
                                 gradient_mode=mode, dropout=COMPARISON["dropout"])
            runs[(seed, mode)] = train(model, dataset, config)
    return runs, time.time() - started


class TestRateFormulaFidelity:
    def test_closed_form_matches_brute_force_over_grid(self):
        started = time.time()
        checked = 0
        diverging = []
        for wi, wl, level in rate_grid():
            params = LifParams.single(float(wi), float(wl))
            result = steps_to_spike(float(level), params)
            if level * wi <= wl:  # exact i <= i_min in rational arithmetic
                assert result.diverges, (wi, wl, level)
                diverging.append((float(wi), float(wl), float(level)))
                continue
            total = exact_first_spike_total_steps(wi, wl, level)
            expected = expected_formula_steps(wi, wl, level, total)
            assert result.n_steps == expected, (wi, wl, level, result.n_steps, expected)
            checked += 1
        assert checked >= 600

        w_in, w_lk, levels = (np.array(v) for v in zip(*diverging))
        quiet = never_spikes_within(w_in, w_lk, levels, steps=1_000_000)
        elapsed = time.time() - started
        report("rate-formula fidelity", quiet and elapsed < 60,
               f"{checked} convergent cells match exactly, {len(diverging)} divergent cells "
               f"silent for 1e6 steps, {elapsed:.1f}s")


class TestGradientOracleEquivalence:
    def test_tape_matches_three_closed_forms(self):
        started = time.time()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            xs, params = random_unit_case(rng, max_len=50)
            gx, gwi, gwl = unit_tape_grads(xs, params)
            ox = oracle_grad_x_sum(xs, params)
            owi = oracle_grad_winput_sum(xs, params)
            owl = oracle_grad_wleak_sum(xs, params)
            np.testing.assert_allclose(gx, ox, rtol=1e-8, atol=1e-12)
            assert gwi == pytest.approx(owi, rel=1e-8, abs=1e-12)
            assert gwl == pytest.approx(owl, rel=1e-8, abs=1e-12)
            scale = max(np.abs(ox).max(), abs(owi), abs(owl), 1e-12)
            worst = max(worst, float(np.abs(gx - ox).max()) / scale)
        elapsed = time.time() - started
        report("gradient-oracle equivalence", elapsed < 60,
               f"200 sequences, worst relative deviation {worst:.2e}, {elapsed:.1f}s")


class TestGradientLocality:
    def test_spike_gradient_reaches_back_to_the_last_reset(self):
        rng = np.random.default_rng(515)
        checked = 0
        attempts = 0
        while checked < 100:
            attempts += 1
            assert attempts < 5000, "could not find enough multi-spike sequences"
            xs, params = random_unit_case(rng, max_len=50)
            wi, wl, vth = params.scalars()
            potentials, spikes = simulate_unit(xs, wi, wl, vth)
            spike_idx = np.nonzero(spikes)[0]
            if len(spike_idx) < 2:
                continue
            t = int(spike_idx[-1])
            rho = max(j for j in range(t) if potentials[j] >= vth)
            gx = unit_spike_grad_wrt_input(xs, params, t)
            assert not gx[: rho + 1].any(), "gradient leaked past a reset"
            assert not gx[t + 1:].any()
            for s in range(rho + 1, t + 1):
                expected = wi * (1.0 - wl) ** (t - s)
                assert gx[s] == pytest.approx(expected, rel=1e-12)
            checked += 1
        report("gradient locality", True,
               f"{checked} multi-spike sequences, zeros exact, decays within rtol 1e-12")


class TestArchitectureFidelity:
    def test_parameter_counts_at_paper_dims(self):
        net1 = build_network1(400, 500, 3)
        net2 = build_network2(400, 500, 3)
        by_name1 = {layer.name: layer.parameter_count() for layer in net1.layers}
        by_name2 = {layer.name: layer.parameter_count() for layer in net2.layers}
        expected1 = {"lif": 6, "lstm": 147_720, "dense": 930, "softmax": 310}
        expected2 = {"encoder": 1_441_200, "lif": 2_400, "lstm": 147_720,
                     "dense": 930, "softmax": 310}
        ok = all(by_name1[k] == v for k, v in expected1.items()) and \
            all(by_name2[k] == v for k, v in expected2.items())
        report("architecture fidelity", ok,
               f"network 1 {by_name1}, network 2 {by_name2}")


class TestComparisonExperiment:
    def test_surrogate_beats_disabled_gradient(self, comparison_runs):
        runs, elapsed = comparison_runs
        gaps = []
        floors = []
        for seed in COMPARISON["seeds"]:
            surrogate = runs[(seed, "surrogate")].best_test_accuracy
            disabled = runs[(seed, "disabled")].best_test_accuracy
            gaps.append(surrogate - disabled)
            floors.append(min(surrogate, disabled))
        mean_gap = float(np.mean(gaps))
        ok = mean_gap >= 0.10 and min(floors) > 0.10 and elapsed < 2100
        report("comparison experiment", ok,
               f"mean gap {mean_gap:+.3f} (per-seed {[round(g, 3) for g in gaps]}), "
               f"accuracy floor {min(floors):.3f} > 0.10, runtime {elapsed / 60:.1f} min")

    def test_spike_density_falls_during_training(self, comparison_runs):
        runs, _ = comparison_runs
        flags = []
        details = []
        for seed in COMPARISON["seeds"]:
            run = runs[(seed, "surrogate")]
            at_start = run.history[0].spike_density
            at_best = run.history[run.best_epoch].spike_density
            flags.append(at_best < at_start)
            details.append(f"seed {seed}: {at_start:.3f} -> {at_best:.3f}")
        report("sparse coding", sum(flags) >= 4,
               f"density fell in {sum(flags)}/5 runs ({'; '.join(details)})")


class TestCompressionClaim:
    def test_boolean_raster_compresses_eight_fold(self):
        img = LabeledImage(np.zeros((400, 500, 3), dtype=np.float32), 0)
        raster = SpikeRaster(np.zeros((1200, 500), dtype=bool))
        big = compression_factor(raster, img)
        desk = compression_factor(
            SpikeRaster(np.zeros((96, 40), dtype=bool)),
            LabeledImage(np.zeros((32, 40, 3), dtype=np.float32), 0),
        )
        report("compression factor", big == 8.0 and desk == 8.0,
               f"paper dims {big}, desk dims {desk}")


class TestChanceLevel:
    def test_untrained_network_sits_at_chance(self):
        dataset = generate_synthetic(10, 20, dims=(32, 40, 3), seed=7)
        model = build_network2(32, 40, 3, n_classes=10, hidden=30, seed=7)
        result = evaluate(model, dataset.encoded(), dataset.labels,
                          list(range(len(dataset.images))), 32)
        ok = 0.05 <= result.accuracy <= 0.15
        report("chance-level sanity", ok,
               f"untrained time-averaged accuracy {result.accuracy:.4f} in [0.05, 0.15]")


class TestDeterminism:
    def test_identical_config_reproduces_metrics_bitwise(self, tmp_path):
        config = tmp_path / "config.txt"
        config.write_text(
            "network = 2\nrows = 8\ncols = 12\nchannels = 3\nclasses = 3\n"
            "per_class = 8\nhidden = 6\nbatch_size = 4\nmax_epochs = 3\n"
            "patience = 10\nlearning_rate = 0.002\ndropout = 0.2\nseed = 5\n"
        )
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            assert cli_main(["train", "--config", str(config), "--synthetic",
                             "--out", str(out)]) == 0
            outs.append((out / "metrics.csv").read_bytes())
        ok = outs[0] == outs[1]
        report("determinism", ok, f"metrics.csv identical across runs ({len(outs[0])} bytes)")
