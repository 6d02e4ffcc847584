"""Synthetic dense-segmentation data with a planted architectural optimum.

Each image carries small squares whose class is encoded by a two-pixel
marker placed at least eight pixels from the square center. The square
itself looks identical for both foreground classes, so labeling its pixels
requires a receptive field that reaches the marker; candidates with dilated
or 5x5 depthwise kernels therefore have strictly higher attainable accuracy
than undilated 3x3 blocks. Generation is a pure function of
(seed, size, difficulty, split).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .search_space import (
    CANDIDATES,
    ConvSpec,
    DecoderSpec,
    MacroArch,
    SKIP_INDEX,
    SuperblockSpec,
)

__all__ = [
    "ToyDataset",
    "generate",
    "miou",
    "toy_space",
    "toy_space_pair",
    "write_dataset",
    "read_dataset",
    "DATASET_MAGIC",
]

DATASET_MAGIC = b"GNAS-TOY"
_SPLIT_IDS = {"train": 0, "val": 1}

_SQUARE = 6
_MARKER = 2
_BANDS = 3  # rows of placement slots
_COLS = 2  # slots per row


@dataclass(frozen=True)
class ToyDataset:
    images: np.ndarray  # (B, 3, H, W) float32
    labels: np.ndarray  # (B, H, W) int64
    num_classes: int
    split: str
    seed: int
    difficulty: float

    def __post_init__(self):
        if self.images.ndim != 4 or self.labels.ndim != 3:
            raise ValueError("images must be (B, 3, H, W) and labels (B, H, W)")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image/label count mismatch")


def _marker_gap(difficulty: float) -> int:
    # Default difficulty (1.0) puts the marker center 8 px from the square
    # center; harder settings push it further out.
    return 3 + round(difficulty)


def marker_distance(difficulty: float = 1.0) -> float:
    """Center-to-center distance between a square and its class marker."""
    return _SQUARE / 2 + _marker_gap(difficulty) + _MARKER / 2


_NOISE_STD = 0.05
_SQUARE_AMP = 1.0
_MARKER_AMP = 1.5


def _render_image(rng: np.random.Generator, image_size: int, num_classes: int,
                  gap: int) -> tuple[np.ndarray, np.ndarray]:
    h = w = image_size
    img = rng.normal(0.0, _NOISE_STD, size=(3, h, w)).astype(np.float32)
    labels = np.zeros((h, w), dtype=np.int64)
    foot_w = _SQUARE + gap + _MARKER
    if foot_w + 2 > w // _COLS:
        raise ValueError(
            f"image size {image_size} too small for marker gap {gap}"
        )
    band_h = h // _BANDS
    per_class = _BANDS * _COLS // (num_classes - 1)
    classes = np.repeat(np.arange(1, num_classes), per_class)
    classes = rng.permutation(classes)
    slot = 0
    for band in range(_BANDS):
        for col in range(_COLS):
            cls = int(classes[slot])
            slot += 1
            r0 = band * band_h + int(rng.integers(1, band_h - _SQUARE))
            c0 = col * (w // _COLS) + int(rng.integers(1, w // _COLS - foot_w))
            img[0, r0 : r0 + _SQUARE, c0 : c0 + _SQUARE] += _SQUARE_AMP
            labels[r0 : r0 + _SQUARE, c0 : c0 + _SQUARE] = cls
            mr = r0 + _SQUARE // 2 - _MARKER // 2
            mc = c0 + _SQUARE + gap
            img[cls, mr : mr + _MARKER, mc : mc + _MARKER] += _MARKER_AMP
            labels[mr : mr + _MARKER, mc : mc + _MARKER] = cls
    return img, labels


def generate(seed: int, size: int, difficulty: float = 1.0, split: str = "train",
             image_size: int = 32, num_classes: int = 3) -> ToyDataset:
    """Create a deterministic dataset of ``size`` images.

    Train and val splits draw from disjoint per-image seed streams.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if split not in _SPLIT_IDS:
        raise ValueError(f"split must be one of {sorted(_SPLIT_IDS)}")
    if num_classes != 3:
        raise ValueError("the planted task uses exactly 3 classes")
    gap = _marker_gap(difficulty)
    split_id = _SPLIT_IDS[split]
    images = np.empty((size, 3, image_size, image_size), dtype=np.float32)
    labels = np.empty((size, image_size, image_size), dtype=np.int64)
    for i in range(size):
        rng = np.random.default_rng(np.random.SeedSequence((seed, split_id, i)))
        images[i], labels[i] = _render_image(rng, image_size, num_classes, gap)
    return ToyDataset(images, labels, num_classes, split, seed, difficulty)


def miou(predictions: np.ndarray, labels: np.ndarray, num_classes: int) -> float:
    """Mean over classes of intersection over union.

    Classes absent from both predictions and labels are excluded from the
    mean, so an all-background batch with all-background predictions scores
    on the background class alone.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"prediction shape {predictions.shape} != label shape {labels.shape}"
        )
    ious = []
    for c in range(num_classes):
        pred_c = predictions == c
        true_c = labels == c
        union = np.logical_or(pred_c, true_c).sum()
        if union == 0:
            continue
        inter = np.logical_and(pred_c, true_c).sum()
        ious.append(inter / union)
    if not ious:
        raise ValueError("no classes present in either input")
    return float(np.mean(ious))


# ---------------------------------------------------------------------------
# Toy search spaces sized for desk-scale experiments.
# ---------------------------------------------------------------------------


def _toy_superblocks(rows) -> tuple[SuperblockSpec, ...]:
    out = []
    os = 2
    for i, (c_in, c_out, stride) in enumerate(rows):
        os *= stride
        skip_ok = stride == 1 and c_out >= c_in
        cands = CANDIDATES if skip_ok else CANDIDATES[:SKIP_INDEX]
        out.append(
            SuperblockSpec(index=i, c_in=c_in, c_out=c_out, stride=stride,
                           output_stride=os, candidates=cands)
        )
    return tuple(out)


def toy_space(num_classes: int = 3) -> MacroArch:
    """Two searched superblocks; the first is the decisive one.

    The stride-1 block at output stride 2 is the only skippable position,
    and on the planted task its receptive field decides whether square
    pixels can see their markers.
    """
    return MacroArch(
        name="toy",
        stem=ConvSpec(3, 16, 3, 2),
        superblocks=_toy_superblocks([(16, 16, 1), (16, 32, 2)]),
        decoder=DecoderSpec("lr_aspp", internal_channels=32, num_classes=num_classes),
        low_level_tap=0,
    )


def toy_space_pair(num_classes: int = 3) -> MacroArch:
    """Three searched superblocks with two skippable capacity sites.

    One site sits at output stride 2 (high resolution, few channels), one at
    output stride 4 (low resolution, more channels); the two differ in where
    compute is memory-traffic-heavy versus MAC-heavy, which is what lets
    MAC-optimized and latency-optimized searches diverge.
    """
    return MacroArch(
        name="toy_pair",
        stem=ConvSpec(3, 16, 3, 2),
        superblocks=_toy_superblocks([(16, 16, 1), (16, 56, 2), (56, 56, 1)]),
        decoder=DecoderSpec("lr_aspp", internal_channels=32, num_classes=num_classes),
        low_level_tap=0,
    )


TOY_SPACES = {"toy": toy_space, "toy_pair": toy_space_pair}


# ---------------------------------------------------------------------------
# Portable container: fixed little-endian header, raw arrays, JSON manifest.
# Header: magic (8 bytes), version u32, count u32, channels u32, height u32,
# width u32, num_classes u32; then images as float32 and labels as int64,
# both C-order.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<8sIIIIII")
_FORMAT_VERSION = 1


def write_dataset(dataset: ToyDataset, data_path, manifest_path=None) -> dict:
    b, c, h, w = dataset.images.shape
    payload = (
        _HEADER.pack(DATASET_MAGIC, _FORMAT_VERSION, b, c, h, w, dataset.num_classes)
        + dataset.images.astype("<f4").tobytes(order="C")
        + dataset.labels.astype("<i8").tobytes(order="C")
    )
    with open(data_path, "wb") as fh:
        fh.write(payload)
    manifest = {
        "format_version": _FORMAT_VERSION,
        "seed": dataset.seed,
        "size": b,
        "split": dataset.split,
        "difficulty": dataset.difficulty,
        "image_size": h,
        "num_classes": dataset.num_classes,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    if manifest_path is not None:
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return manifest


def read_dataset(data_path, split: str = "train", seed: int = 0,
                 difficulty: float = 1.0) -> ToyDataset:
    with open(data_path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, b, c, h, w, num_classes = _HEADER.unpack(header)
        if magic != DATASET_MAGIC:
            raise ValueError(f"not a dataset container (magic {magic!r})")
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported container version {version}")
        images = np.frombuffer(fh.read(b * c * h * w * 4), dtype="<f4")
        labels = np.frombuffer(fh.read(b * h * w * 8), dtype="<i8")
    images = images.reshape(b, c, h, w).copy()
    labels = labels.reshape(b, h, w).copy()
    return ToyDataset(images, labels, num_classes, split, seed, difficulty)
