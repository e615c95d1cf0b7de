"""Image ingestion, column-wise time encoding, synthetic gratings, and the
binary dataset cache.

The time encoding treats the image's x axis as time: column t of a
[rows, cols, channels] image becomes the feature vector at timestep t,
flattened row-major with the channel index minor (feature r * channels + c
is row r, channel c). The encoding is lossless and `decode_columns`
inverts it exactly.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .lif import SpikeRaster
from .tensor import ShapeError

__all__ = [
    "LabeledImage",
    "Dataset",
    "encode_columns",
    "decode_columns",
    "load_image_dataset",
    "generate_synthetic",
    "compression_factor",
    "save_cache",
    "load_cache",
]

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"SGDC"
CACHE_VERSION = 1


@dataclass
class LabeledImage:
    """Pixels normalized to [0, 1] (float32, [rows, cols, channels]) plus the
    class index and, when loaded from disk, the source path."""

    pixels: np.ndarray
    label: int
    path: str | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3:
            raise ShapeError(f"image pixels must be [rows, cols, channels], got {self.pixels.shape}")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass
class Dataset:
    images: list[LabeledImage]
    class_names: list[str]
    train_idx: list[int]
    test_idx: list[int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.images:
            raise ValueError("dataset has no images")
        shape = self.images[0].pixels.shape
        for img in self.images:
            if img.pixels.shape != shape:
                raise ShapeError(f"all images must share dims, got {shape} and {img.pixels.shape}")
        self._encoded: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.images[0].rows

    @property
    def cols(self) -> int:
        return self.images[0].cols

    @property
    def channels(self) -> int:
        return self.images[0].channels

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([img.label for img in self.images], dtype=int)

    def encoded(self) -> np.ndarray:
        """All images as [n, timesteps, rows * channels] float64, cached."""
        if self._encoded is None:
            self._encoded = np.stack([encode_columns(img) for img in self.images])
        return self._encoded


def encode_columns(img) -> np.ndarray:
    """Image to time series: [cols, rows * channels] float64, one column per
    timestep, features ordered row-major with channel minor."""
    pixels = img.pixels if isinstance(img, LabeledImage) else np.asarray(img)
    if pixels.ndim != 3:
        raise ShapeError(f"expected [rows, cols, channels], got {pixels.shape}")
    rows, cols, channels = pixels.shape
    return np.transpose(pixels, (1, 0, 2)).reshape(cols, rows * channels).astype(np.float64)


def decode_columns(sequence: np.ndarray, rows: int, channels: int) -> np.ndarray:
    """Exact inverse of `encode_columns`."""
    seq = np.asarray(sequence)
    if seq.ndim != 2 or seq.shape[1] != rows * channels:
        raise ShapeError(f"sequence shape {seq.shape} does not match rows={rows}, channels={channels}")
    cols = seq.shape[0]
    return np.transpose(seq.reshape(cols, rows, channels), (1, 0, 2))


def _stratified_split(labels: np.ndarray, test_fraction: float, rng: np.random.Generator):
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in np.unique(labels):
        members = np.nonzero(labels == label)[0]
        members = members[rng.permutation(members.size)]
        n_test = max(1, int(round(members.size * test_fraction))) if members.size > 1 else 0
        test_idx.extend(int(i) for i in members[:n_test])
        train_idx.extend(int(i) for i in members[n_test:])
    return sorted(train_idx), sorted(test_idx)


def load_image_dataset(root, target_dims=(32, 40, 3), seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Load a class-per-subdirectory PNG corpus.

    Subdirectories of ``root`` in lexicographic order become labels 0, 1,
    and so on; files inside each class load in lexicographic order, resize
    bilinearly to the target dims, and normalize 8-bit values to [0, 1].
    Unreadable files are skipped with a warning; an empty class is an
    error. The train/test split is stratified and seeded.
    """
    rows, cols, channels = target_dims
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"dataset root {root} has no class subdirectories")

    mode = "RGB" if channels == 3 else "L"
    images: list[LabeledImage] = []
    for label, class_dir in enumerate(class_dirs):
        loaded = 0
        for path in sorted(class_dir.glob("*.png")):
            try:
                with Image.open(path) as handle:
                    img = handle.convert(mode).resize((cols, rows), Image.BILINEAR)
                pixels = np.asarray(img, dtype=np.float32) / 255.0
            except Exception as err:
                logger.warning("skipping unreadable image %s: %s", path, err)
                continue
            if pixels.ndim == 2:
                pixels = pixels[:, :, None]
            images.append(LabeledImage(pixels, label, str(path)))
            loaded += 1
        if loaded == 0:
            raise ValueError(f"class directory '{class_dir.name}' contains no readable PNG images")

    labels = np.array([img.label for img in images])
    rng = np.random.default_rng([seed, 4])
    train_idx, test_idx = _stratified_split(labels, test_fraction, rng)
    return Dataset(images, [d.name for d in class_dirs], train_idx, test_idx,
                   meta={"kind": "image", "root": str(root)})


def generate_synthetic(classes: int, per_class: int, dims=(32, 40, 3), seed: int = 0,
                       noise: float = 0.05, amplitude: float = 0.3, shear: float = 0.02,
                       distractor: float = 0.35, baseline: float = 0.5,
                       test_fraction: float = 0.2) -> Dataset:
    """Synthetic gratings whose class is a horizontal spatial frequency.

    Class k oscillates k + 1 times across the image width in the even rows
    (the signal band), with a fixed per-class orientation tilt, a random
    global phase per image, random per-channel gain jitter, and Gaussian
    pixel noise. The odd rows carry a class-independent distractor grating
    whose frequency is drawn per image from a band strictly above every
    class frequency. Color statistics are class-independent, so hue alone
    cannot separate the classes; the class signal lives in the low bins of
    the column-frequency spectrum, which an FFT peak over those bins
    recovers exactly at zero pixel noise.

    The distractor is what makes the task reward training the layers in
    front of the spiking layer: a fixed random projection mixes the loud
    nuisance band into every unit, while a learned projection can null the
    distractor rows and sum the signal rows coherently.
    """
    if not 1 <= classes <= 10:
        raise ValueError("classes must lie in 1..10")
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    rows, cols, channels = dims
    nyquist = cols // 2
    if classes >= nyquist:
        raise ValueError(f"image width {cols} too small for {classes} distinct class frequencies")
    rng = np.random.default_rng([seed, 3])
    frequencies = np.arange(1, classes + 1)
    # distractor frequencies sit strictly above the class band; on very
    # narrow images the band is empty and the distractor is skipped
    distractor_band = np.arange(classes + 3, nyquist)
    shears = np.array([shear * ((k % 3) - 1) for k in range(classes)])
    signal_rows = (np.arange(rows) % 2 == 0).astype(float)[:, None]

    row_idx = np.arange(rows)[:, None]
    col_idx = np.arange(cols)[None, :]
    images: list[LabeledImage] = []
    for k in range(classes):
        angle = 2.0 * np.pi * frequencies[k] * (col_idx + shears[k] * row_idx) / cols
        for _ in range(per_class):
            phase = rng.uniform(0.0, 2.0 * np.pi)
            gains = rng.uniform(0.7, 1.0, size=channels)
            grating = np.sin(angle + phase) * signal_rows
            if distractor > 0 and distractor_band.size:
                f_distract = rng.choice(distractor_band)
                # independent phase per row: the nuisance band is incoherent
                # across rows, so balanced weights can cancel it
                d_phases = rng.uniform(0.0, 2.0 * np.pi, size=(rows, 1))
                d_wave = np.sin(2.0 * np.pi * f_distract * col_idx / cols + d_phases)
                grating = grating + (distractor / max(amplitude, 1e-12)) * d_wave * (1.0 - signal_rows)
            pixels = baseline + amplitude * grating[:, :, None] * gains[None, None, :]
            if noise > 0:
                pixels = pixels + rng.normal(0.0, noise, size=(rows, cols, channels))
            images.append(LabeledImage(np.clip(pixels, 0.0, 1.0).astype(np.float32), k))

    labels = np.array([img.label for img in images])
    train_idx, test_idx = _stratified_split(labels, test_fraction, rng)
    return Dataset(images, [f"grating_{f}" for f in frequencies], train_idx, test_idx,
                   meta={"kind": "synthetic", "frequencies": frequencies.tolist(),
                         "noise": noise, "amplitude": amplitude, "shear": shear,
                         "distractor": distractor, "baseline": baseline, "seed": seed})


def compression_factor(raster: SpikeRaster, img: LabeledImage) -> float:
    """Bits in the 8-bit image divided by bits in the boolean raster.

    Requires the raster to correspond one-to-one with the image's column
    payload (rows * channels neurons, one timestep per column); the ratio
    is then exactly 8.0 since every 8-bit value became one boolean.
    """
    expected = (img.rows * img.channels, img.cols)
    if raster.spikes.shape != expected:
        raise ShapeError(f"raster shape {raster.spikes.shape} does not match image payload {expected}")
    image_bits = img.rows * img.cols * img.channels * 8
    raster_bits = raster.n_neurons * raster.timesteps
    return image_bits / raster_bits


def save_cache(dataset: Dataset, path) -> None:
    """Binary dataset cache: magic, version, dims, counts, meta, labels,
    split indices, then the row-major float32 pixel payload. Written bytes
    round-trip exactly through `load_cache`."""
    import json

    path = Path(path)
    labels = dataset.labels.astype(np.int32)
    n = len(dataset.images)
    payload = np.stack([img.pixels for img in dataset.images]).astype(np.float32)
    meta_json = json.dumps({"class_names": dataset.class_names, "meta": dataset.meta},
                           sort_keys=True).encode("utf-8")
    body = bytearray()
    body += struct.pack("<6I", dataset.rows, dataset.cols, dataset.channels,
                        n, len(dataset.train_idx), len(dataset.test_idx))
    body += struct.pack("<I", len(meta_json)) + meta_json
    body += labels.tobytes()
    body += np.asarray(dataset.train_idx, dtype=np.int32).tobytes()
    body += np.asarray(dataset.test_idx, dtype=np.int32).tobytes()
    body += payload.tobytes()
    blob = CACHE_MAGIC + struct.pack("<I", CACHE_VERSION) + bytes(body)
    blob += struct.pack("<I", zlib.crc32(bytes(body)))
    path.write_bytes(blob)


def load_cache(path) -> Dataset:
    import json

    blob = Path(path).read_bytes()
    if blob[:4] != CACHE_MAGIC:
        raise ValueError(f"{path} is not a dataset cache (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported cache version {version}")
    body = blob[8:-4]
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(body) != stored_crc:
        raise ValueError(f"{path} failed its checksum")
    rows, cols, channels, n, n_train, n_test = struct.unpack_from("<6I", body, 0)
    offset = 24
    (meta_len,) = struct.unpack_from("<I", body, offset)
    offset += 4
    info = json.loads(body[offset:offset + meta_len].decode("utf-8"))
    offset += meta_len
    labels = np.frombuffer(body, dtype=np.int32, count=n, offset=offset).copy()
    offset += 4 * n
    train_idx = np.frombuffer(body, dtype=np.int32, count=n_train, offset=offset).copy()
    offset += 4 * n_train
    test_idx = np.frombuffer(body, dtype=np.int32, count=n_test, offset=offset).copy()
    offset += 4 * n_test
    payload = np.frombuffer(body, dtype=np.float32, count=n * rows * cols * channels, offset=offset)
    payload = payload.reshape(n, rows, cols, channels).copy()
    images = [LabeledImage(payload[i], int(labels[i])) for i in range(n)]
    return Dataset(images, list(info["class_names"]), [int(i) for i in train_idx],
                   [int(i) for i in test_idx], meta=dict(info["meta"]))
