"""Run-artifact file formats.

Everything a training run writes is either human-readable structured text
(config snapshot, metrics table, manifest, viz bundle) or a documented
binary container (checkpoint, dataset cache). Text files carry the config
hash and seed; numeric text round-trips exactly because floats are written
with shortest-roundtrip repr. The checkpoint container is:

    magic "SGCP" | u32 version | u32 meta_len | meta json (utf-8)
    | u32 n_blocks | blocks | u32 crc32 of everything after the magic

with each block: u16 name_len | name utf-8 | u8 ndim | u32 dims
| float32 payload (row-major). The viz bundle is a single JSON document
with a "format"/"version" header.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

__all__ = [
    "config_hash",
    "canonical_config_text",
    "write_config",
    "read_config_file",
    "write_metrics_csv",
    "read_metrics_csv",
    "write_manifest",
    "read_manifest",
    "save_checkpoint",
    "load_checkpoint",
    "save_bundle",
    "load_bundle",
    "BUNDLE_FORMAT",
    "BUNDLE_VERSION",
]

CHECKPOINT_MAGIC = b"SGCP"
CHECKPOINT_VERSION = 1
BUNDLE_FORMAT = "spikegrad-viz"
BUNDLE_VERSION = 1
METRICS_COLUMNS = ("epoch", "train_acc", "test_acc", "loss", "spike_density")


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_config_text(config: dict) -> str:
    lines = [f"{key} = {_format_value(config[key])}" for key in sorted(config)]
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_config_text(config).encode("utf-8")).hexdigest()[:16]


def write_config(path, config: dict) -> None:
    Path(path).write_text("# spikegrad run config\n" + canonical_config_text(config))


def read_config_file(path) -> dict[str, str]:
    """Parse a `key = value` config file into raw strings; blank lines and
    `#` comments are ignored. Validation happens in the CLI layer."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def write_metrics_csv(path, history, cfg_hash: str, seed: int) -> None:
    lines = [f"# config_hash={cfg_hash} seed={seed}", ",".join(METRICS_COLUMNS)]
    for m in history:
        lines.append(",".join([
            str(m.epoch),
            repr(m.train_accuracy),
            repr(m.test_accuracy),
            repr(m.mean_loss),
            repr(m.spike_density),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path):
    """Returns (header meta dict, list of rows as dicts with exact floats)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path} is missing its metadata header")
    meta = dict(item.split("=", 1) for item in lines[0][1:].split())
    if lines[1] != ",".join(METRICS_COLUMNS):
        raise ValueError(f"{path} has unexpected columns: {lines[1]!r}")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        parts = line.split(",")
        rows.append({
            "epoch": int(parts[0]),
            "train_acc": float(parts[1]),
            "test_acc": float(parts[2]),
            "loss": float(parts[3]),
            "spike_density": float(parts[4]),
        })
    return meta, rows


def write_manifest(path, entries: dict) -> None:
    lines = ["# spikegrad run manifest"]
    lines += [f"{key} = {_format_value(entries[key])}" for key in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict[str, str]:
    return read_config_file(path)


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict) -> None:
    body = bytearray()
    body += struct.pack("<I", CHECKPOINT_VERSION)
    meta_json = json.dumps(meta, sort_keys=True).encode("utf-8")
    body += struct.pack("<I", len(meta_json)) + meta_json
    body += struct.pack("<I", len(params))
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=np.float32)
        encoded = name.encode("utf-8")
        body += struct.pack("<H", len(encoded)) + encoded
        body += struct.pack("<B", arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += arr.tobytes()
    blob = CHECKPOINT_MAGIC + bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
    Path(path).write_bytes(blob)


def load_checkpoint(path):
    """Returns (params dict of float32 arrays, meta dict)."""
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a checkpoint (bad magic)")
    body = blob[4:-4]
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(body) != stored_crc:
        raise ValueError(f"{path} failed its checksum")
    offset = 0
    (version,) = struct.unpack_from("<I", body, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", body, offset)
    offset += 4
    meta = json.loads(body[offset:offset + meta_len].decode("utf-8"))
    offset += meta_len
    (n_blocks,) = struct.unpack_from("<I", body, offset)
    offset += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(n_blocks):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", body, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", body, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype=np.float32, count=count, offset=offset)
        offset += 4 * count
        params[name] = arr.reshape(shape).copy()
    return params, meta


def save_bundle(path, bundle: dict) -> None:
    if bundle.get("format") != BUNDLE_FORMAT or bundle.get("version") != BUNDLE_VERSION:
        raise ValueError("bundle is missing its format/version header")
    Path(path).write_text(json.dumps(bundle, indent=1) + "\n")


def load_bundle(path) -> dict:
    bundle = json.loads(Path(path).read_text())
    if not isinstance(bundle, dict) or bundle.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"{path} is not a viz bundle")
    if bundle.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {bundle.get('version')!r}")
    return bundle
