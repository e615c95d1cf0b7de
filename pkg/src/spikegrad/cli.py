"""Command-line interface: train, eval, analyze-rates, export-viz.

Configuration is a `key = value` text file (see CONFIG_KEYS for the full
set); command-line flags override file values and the SPIKEGRAD_SEED
environment variable overrides the seed last. Errors print a single
machine-parsable line `error [<category>] <message>` to stderr and exit
nonzero (config/usage 2, data 3, checkpoint 4, analysis 5, internal 1).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .artifacts import (
    BUNDLE_FORMAT,
    BUNDLE_VERSION,
    config_hash,
    load_bundle,
    load_checkpoint,
    read_config_file,
    save_bundle,
    save_checkpoint,
    write_config,
    write_manifest,
    write_metrics_csv,
)
from .data import Dataset, encode_columns, generate_synthetic, load_image_dataset
from .lif import LifParams, first_spike_step, lif_grad_input_closed_form, min_input, simulate_unit, steps_to_spike
from .tensor import Tensor
from .training import TrainConfig, build_network, confusion_counts, evaluate, train

CONFIG_KEYS: dict[str, type] = {
    "network": int,
    "rows": int,
    "cols": int,
    "channels": int,
    "classes": int,
    "per_class": int,
    "seed": int,
    "optimizer": str,
    "learning_rate": float,
    "batch_size": int,
    "max_epochs": int,
    "patience": int,
    "gradient_mode": str,
    "dropout": float,
    "hidden": int,
    "encoder_bias": float,
    "noise": float,
    "amplitude": float,
    "distractor": float,
    "baseline": float,
    "shear": float,
    "test_fraction": float,
}

DEFAULT_CONFIG = {
    "network": 2,
    "rows": 32,
    "cols": 40,
    "channels": 3,
    "classes": 10,
    "per_class": 100,
    "seed": 0,
    "optimizer": "adam",
    "learning_rate": 0.001,
    "batch_size": 8,
    "max_epochs": 30,
    "patience": 30,
    "gradient_mode": "surrogate",
    "dropout": 0.3,
    "hidden": 30,
    "encoder_bias": 0.4,
    "noise": 0.05,
    "amplitude": 0.3,
    "distractor": 0.35,
    "baseline": 0.5,
    "shear": 0.02,
    "test_fraction": 0.2,
}

EXIT_CODES = {"usage": 2, "config": 2, "data": 3, "checkpoint": 4, "analysis": 5, "internal": 1}

DEMO_UNIT_PARAMS = {"w_input": 0.5, "w_leak": 0.1, "v_thresh": 1.0}
DEMO_SIGNAL = [0.0] * 5 + [0.8] * 15 + [0.0] * 8 + [1.6] * 10 + [0.15] * 12 + [0.5] * 10


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def resolve_config(config_path: str | None, overrides: dict) -> dict:
    """Defaults, then config file, then CLI flags, then SPIKEGRAD_SEED."""
    config = dict(DEFAULT_CONFIG)
    if config_path is not None:
        try:
            raw = read_config_file(config_path)
        except FileNotFoundError:
            raise CliError("config", f"config file not found: {config_path}") from None
        except ValueError as err:
            raise CliError("config", str(err)) from None
        for key, text in raw.items():
            if key not in CONFIG_KEYS:
                raise CliError("config", f"unknown config key '{key}'; valid keys: {', '.join(sorted(CONFIG_KEYS))}")
            try:
                config[key] = CONFIG_KEYS[key](text)
            except ValueError:
                raise CliError("config", f"config key '{key}' expects {CONFIG_KEYS[key].__name__}, got {text!r}") from None
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    env_seed = os.environ.get("SPIKEGRAD_SEED")
    if env_seed is not None:
        try:
            config["seed"] = int(env_seed)
        except ValueError:
            raise CliError("config", f"SPIKEGRAD_SEED must be an integer, got {env_seed!r}") from None
    if config["network"] not in (1, 2):
        raise CliError("config", f"network must be 1 or 2, got {config['network']}")
    return config


def _dataset_from_args(args, config) -> Dataset:
    dims = (config["rows"], config["cols"], config["channels"])
    if getattr(args, "synthetic", False):
        return generate_synthetic(
            config["classes"], config["per_class"], dims=dims, seed=config["seed"],
            noise=config["noise"], amplitude=config["amplitude"], shear=config["shear"],
            distractor=config["distractor"], baseline=config["baseline"],
            test_fraction=config["test_fraction"],
        )
    data_dir = getattr(args, "data", None)
    if data_dir is None:
        raise CliError("data", "provide --data DIR or --synthetic")
    try:
        return load_image_dataset(data_dir, target_dims=dims, seed=config["seed"],
                                  test_fraction=config["test_fraction"])
    except (FileNotFoundError, ValueError) as err:
        raise CliError("data", str(err)) from None


def _build_model(config, gradient_mode: str | None = None):
    mode = gradient_mode if gradient_mode is not None else config["gradient_mode"]
    kwargs = dict(n_classes=config["classes"], hidden=config["hidden"],
                  dropout_rate=config["dropout"], seed=config["seed"], gradient_mode=mode)
    if config["network"] == 2:
        kwargs["encoder_bias"] = config["encoder_bias"]
    return build_network(config["network"], config["rows"], config["cols"], config["channels"], **kwargs)


def _model_from_checkpoint(checkpoint_path):
    try:
        params, meta = load_checkpoint(checkpoint_path)
    except FileNotFoundError:
        raise CliError("checkpoint", f"checkpoint not found: {checkpoint_path}") from None
    except ValueError as err:
        raise CliError("checkpoint", str(err)) from None
    config = dict(DEFAULT_CONFIG)
    config.update(meta["config"])
    model = _build_model(config)
    model.load_snapshot(params)
    return model, config, meta


def _raster_payload(capture: dict, item: int = 0) -> dict:
    spikes = capture["spikes"][item].T
    potential = capture["potential"][item].T
    return {
        "spikes": spikes.astype(int).tolist(),
        "potential": potential.tolist(),
        "density": float(spikes.mean()),
    }


def cmd_train(args) -> int:
    config = resolve_config(args.config, {
        "network": args.network,
        "seed": args.seed,
        "gradient_mode": args.gradient_mode,
        "max_epochs": args.max_epochs,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "dropout": args.dropout,
        "patience": args.patience,
    })
    dataset = _dataset_from_args(args, config)
    dims = (dataset.rows, dataset.cols, dataset.channels)
    expected = (config["rows"], config["cols"], config["channels"])
    if dims != expected:
        raise CliError("data", f"dataset dims {dims} do not match config dims {expected}")

    model = _build_model(config)
    try:
        train_config = TrainConfig(
            learning_rate=config["learning_rate"], optimizer=config["optimizer"],
            batch_size=config["batch_size"], max_epochs=config["max_epochs"],
            patience=config["patience"], seed=config["seed"],
            gradient_mode=config["gradient_mode"], dropout=config["dropout"],
        )
    except ValueError as err:
        raise CliError("config", str(err)) from None

    run = train(model, dataset, train_config)
    cfg_hash = config_hash(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "config.txt", config)
    write_metrics_csv(out / "metrics.csv", run.history, cfg_hash, config["seed"])

    meta = {
        "config": config,
        "config_hash": cfg_hash,
        "seed": config["seed"],
        "best_epoch": run.best_epoch,
        "best_test_accuracy": run.best_test_accuracy,
    }
    save_checkpoint(out / "checkpoint.bin", run.best_params, meta)

    # re-evaluate through the serialized float32 params so `eval` on the
    # written checkpoint reproduces these numbers exactly
    reloaded, _, _ = _model_from_checkpoint(out / "checkpoint.bin")
    inputs, labels = dataset.encoded(), dataset.labels
    ev_train = evaluate(reloaded, inputs, labels, dataset.train_idx, config["batch_size"])
    ev_test = evaluate(reloaded, inputs, labels, dataset.test_idx, config["batch_size"])

    fresh = _build_model(config)
    sample_idx = int(dataset.test_idx[0])
    sample = Tensor(inputs[sample_idx:sample_idx + 1])
    before_capture: dict = {}
    after_capture: dict = {}
    fresh.forward(sample, capture=before_capture)
    reloaded.forward(sample, capture=after_capture)
    save_bundle(out / "sample_rasters.json", {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "kind": "rasters",
        "config_hash": cfg_hash,
        "seed": config["seed"],
        "image_index": sample_idx,
        "before": _raster_payload(before_capture),
        "after": _raster_payload(after_capture),
    })

    write_manifest(out / "manifest.txt", {
        "config_hash": cfg_hash,
        "seed": config["seed"],
        "epochs_run": run.history[-1].epoch,
        "best_epoch": run.best_epoch,
        "best_test_accuracy": run.best_test_accuracy,
        "checkpoint_train_accuracy": ev_train.accuracy,
        "checkpoint_test_accuracy": ev_test.accuracy,
        "aborted": run.aborted if run.aborted else "no",
    })

    print(f"trained network {config['network']} for {run.history[-1].epoch} epochs "
          f"(best test accuracy {run.best_test_accuracy:.4f} at epoch {run.best_epoch})")
    if run.aborted:
        print(f"run aborted early: {run.aborted}")
    print(f"artifacts written to {out}")
    return 0


def cmd_eval(args) -> int:
    model, config, meta = _model_from_checkpoint(args.checkpoint)
    dataset = _dataset_from_args(args, config)
    dims = (dataset.rows, dataset.cols, dataset.channels)
    expected = (config["rows"], config["cols"], config["channels"])
    if dims != expected:
        raise CliError("data", f"dataset dims {dims} do not match checkpoint dims {expected}")
    if dataset.n_classes != config["classes"]:
        raise CliError("data", f"dataset has {dataset.n_classes} classes, checkpoint expects {config['classes']}")

    split = {"train": dataset.train_idx, "test": dataset.test_idx,
             "all": list(range(len(dataset.images)))}[args.split]
    if len(split) == 0:
        raise CliError("data", f"evaluation split '{args.split}' is empty")

    inputs, labels = dataset.encoded(), dataset.labels
    result = evaluate(model, inputs, labels, split, config["batch_size"])

    indices = np.asarray(split, dtype=int)
    counts = np.zeros((dataset.n_classes, dataset.n_classes), dtype=int)
    from .tensor import no_grad
    with no_grad():
        for start in range(0, indices.size, 64):
            batch = indices[start:start + 64]
            probs = model.forward(Tensor(np.ascontiguousarray(inputs[batch]))).data
            counts += confusion_counts(probs, labels[batch], dataset.n_classes)

    print(f"images = {result.n_images}")
    print(f"accuracy = {result.accuracy!r}")
    print(f"spike_density = {result.spike_density!r}")
    print("confusion =  # rows: true class, columns: predicted")
    for row in counts:
        print(" ".join(f"{int(v):4d}" for v in row))
    return 0


def _parse_grid(spec: str, name: str) -> list[float]:
    try:
        start_text, stop_text, step_text = spec.split(":")
        start, stop, step = float(start_text), float(stop_text), float(step_text)
    except ValueError:
        raise CliError("usage", f"--{name} expects START:STOP:STEP, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise CliError("usage", f"--{name}: empty or descending grid {spec!r}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def cmd_analyze_rates(args) -> int:
    w_inputs = _parse_grid(args.w_input, "w-input")
    w_leaks = _parse_grid(args.w_leak, "w-leak")
    inputs = _parse_grid(args.input, "input")

    lines = ["# spikegrad analyze-rates v1", "w_input,w_leak,input,i_min,n_formula,n_simulated"]
    mismatches = 0
    for wi in w_inputs:
        if wi <= 0:
            raise CliError("usage", "w_input grid must be strictly positive")
        for wl in w_leaks:
            params = LifParams.single(wi, wl)
            i_min = min_input(params)
            for level in inputs:
                if level <= 0:
                    raise CliError("usage", "input grid must be strictly positive")
                rate = steps_to_spike(level, params)
                if rate.diverges:
                    formula_text = simulated_text = "diverges"
                else:
                    total = first_spike_step(level, params, max_steps=args.max_steps)
                    simulated = None if total is None else (total if wl == 0 else total - 1)
                    formula_text = str(rate.n_steps)
                    simulated_text = "diverges" if simulated is None else str(simulated)
                    if simulated != rate.n_steps:
                        mismatches += 1
                lines.append(f"{wi!r},{wl!r},{level!r},{i_min!r},{formula_text},{simulated_text}")

    table = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(table)
        print(f"wrote {len(lines) - 2} rows to {args.out}")
    else:
        sys.stdout.write(table)
    if mismatches:
        raise CliError("analysis", f"{mismatches} grid cells disagree between formula and simulation")
    return 0


def _unit_section() -> dict:
    wi, wl, vth = DEMO_UNIT_PARAMS["w_input"], DEMO_UNIT_PARAMS["w_leak"], DEMO_UNIT_PARAMS["v_thresh"]
    potentials, spikes = simulate_unit(DEMO_SIGNAL, wi, wl, vth)
    return {
        "w_input": wi,
        "w_leak": wl,
        "v_thresh": vth,
        "input": list(map(float, DEMO_SIGNAL)),
        "potential": potentials.tolist(),
        "spike_indices": np.nonzero(spikes)[0].tolist(),
    }


def _gradient_section(length: int = 25) -> dict:
    wi, wl, vth = DEMO_UNIT_PARAMS["w_input"], DEMO_UNIT_PARAMS["w_leak"], DEMO_UNIT_PARAMS["v_thresh"]
    signal = np.asarray(DEMO_SIGNAL[5:5 + length], dtype=float)
    params = LifParams.single(wi, wl, vth)
    potentials, spikes = simulate_unit(signal, wi, wl, vth)
    rows = []
    for t in range(len(signal)):
        row = [lif_grad_input_closed_form(signal, params, t, t - s) if s <= t else 0.0
               for s in range(len(signal))]
        rows.append(row)
    return {
        "w_input": wi,
        "w_leak": wl,
        "v_thresh": vth,
        "input": signal.tolist(),
        "potential": potentials.tolist(),
        "spike_indices": np.nonzero(spikes)[0].tolist(),
        "rows": rows,
    }


def _load_viz_image(args, config, dataset_seed: int):
    dims = (config["rows"], config["cols"], config["channels"])
    if getattr(args, "image", None):
        try:
            from PIL import Image

            with Image.open(args.image) as handle:
                mode = "RGB" if dims[2] == 3 else "L"
                img = handle.convert(mode).resize((dims[1], dims[0]), Image.BILINEAR)
            pixels = np.asarray(img, dtype=np.float32) / 255.0
            if pixels.ndim == 2:
                pixels = pixels[:, :, None]
            return pixels, None
        except Exception as err:
            raise CliError("data", f"cannot load image {args.image}: {err}") from None
    demo = generate_synthetic(config["classes"], 1, dims=dims, seed=dataset_seed,
                              noise=config["noise"], amplitude=config["amplitude"],
                              shear=config["shear"], distractor=config["distractor"],
                              baseline=config["baseline"])
    img = demo.images[2 % len(demo.images)]
    return img.pixels, img.label


def cmd_export_viz(args) -> int:
    if args.checkpoint:
        model, config, meta = _model_from_checkpoint(args.checkpoint)
        cfg_hash = meta["config_hash"]
    elif args.demo:
        config = resolve_config(None, {"seed": args.seed})
        model = _build_model(config)
        cfg_hash = config_hash(config)
    else:
        raise CliError("usage", "provide --checkpoint PATH or --demo")

    pixels, label = _load_viz_image(args, config, config["seed"])
    sequence = encode_columns(pixels)
    capture: dict = {}
    probs = model.forward(Tensor(sequence[None, :, :]), capture=capture)

    fresh = _build_model(config)
    before_capture: dict = {}
    fresh.forward(Tensor(sequence[None, :, :]), capture=before_capture)

    lif_layer = model.lif_layers()[0]
    view = lif_layer.params_view()
    bundle = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "kind": "explorer",
        "config_hash": cfg_hash,
        "seed": config["seed"],
        "network": config["network"],
        "unit": _unit_section(),
        "gradient_table": _gradient_section(),
        "image": {
            "rows": int(pixels.shape[0]),
            "cols": int(pixels.shape[1]),
            "channels": int(pixels.shape[2]),
            "label": label,
            "pixels": pixels.astype(float).tolist(),
            "lif_w_input": view.input_values.tolist(),
            "lif_w_leak": view.leak_values.tolist(),
            **_raster_payload(capture),
        },
        "network_panel": {
            "class_names": [f"class_{i}" for i in range(config["classes"])],
            "hidden": capture["hidden"][0].T.tolist(),
            "probs": capture["probs"][0].T.tolist(),
            "predicted": int(np.argmax(capture["probs"][0].mean(axis=0))),
            "label": label,
        },
        "rasters": {
            "before": _raster_payload(before_capture),
            "after": _raster_payload(capture),
        },
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bundle.json"
    save_bundle(path, bundle)
    print(f"wrote explorer bundle to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikegrad",
                                     description="Spiking-network training and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a network and write run artifacts")
    p_train.add_argument("--config", help="key = value config file")
    p_train.add_argument("--data", help="directory of class subdirectories with PNG images")
    p_train.add_argument("--synthetic", action="store_true", help="use the synthetic grating dataset")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--network", type=int, choices=(1, 2))
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--gradient-mode", dest="gradient_mode", choices=("surrogate", "disabled"))
    p_train.add_argument("--max-epochs", dest="max_epochs", type=int)
    p_train.add_argument("--learning-rate", dest="learning_rate", type=float)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--patience", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data")
    p_eval.add_argument("--synthetic", action="store_true")
    p_eval.add_argument("--split", choices=("train", "test", "all"), default="test")
    p_eval.set_defaults(func=cmd_eval)

    p_rates = sub.add_parser("analyze-rates", help="closed-form vs simulated steps-to-spike grid")
    p_rates.add_argument("--w-input", dest="w_input", default="0.1:1.0:0.1", metavar="START:STOP:STEP")
    p_rates.add_argument("--w-leak", dest="w_leak", default="0.0:0.5:0.05", metavar="START:STOP:STEP")
    p_rates.add_argument("--input", default="0.1:2.0:0.1", metavar="START:STOP:STEP")
    p_rates.add_argument("--max-steps", dest="max_steps", type=int, default=100_000)
    p_rates.add_argument("--out", help="write the CSV here instead of stdout")
    p_rates.set_defaults(func=cmd_analyze_rates)

    p_viz = sub.add_parser("export-viz", help="write the explorer bundle")
    p_viz.add_argument("--checkpoint")
    p_viz.add_argument("--demo", action="store_true", help="untrained default model")
    p_viz.add_argument("--image", help="PNG to run through the network")
    p_viz.add_argument("--seed", type=int, default=0)
    p_viz.add_argument("--out", required=True)
    p_viz.set_defaults(func=cmd_export_viz)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except CliError as err:
        print(f"error [{err.category}] {err}", file=sys.stderr)
        return EXIT_CODES.get(err.category, 1)
    except Exception as err:  # pragma: no cover - safety net
        print(f"error [internal] {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CODES["internal"]


if __name__ == "__main__":
    sys.exit(main())
