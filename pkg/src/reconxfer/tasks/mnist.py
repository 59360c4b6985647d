"""MNIST digit-transfer suite.

Reads the standard big-endian IDX corpus (raw or gzipped), keeps only the
digits 0/1/8, downsamples each image to 10x10 with area-weighted
resampling, and splits into source (is it a 1?) and target (is it an 8?)
tasks. The common information is the image itself, so the reconstruction
target equals the network input.
"""

import gzip
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, IdxParseError
from ..training import Architecture, LabeledDataset, TaskAdapter
from ..utils import Standardizer

KEEP_DIGITS = (0, 1, 8)
SOURCE_DIGIT = 1
TARGET_DIGIT = 8
PRED_CLAMP = 1e-7

# shuffle fraction tables: (source fraction, source-train fraction,
# target-train fraction); the remainders are the validation splits
SPLIT_FRACTIONS = {
    "A": (0.95, 0.70, 0.10),
    "B": (0.90, 0.70, 0.50),
}

# split sizes for the canonical corpus (18516 filtered training images)
CANONICAL_SIZES = {
    "A": (12313, 5277, 92, 834),
    "B": (11664, 5000, 926, 926),
}
CANONICAL_TRAIN_TOTAL = 18516
CANONICAL_EVAL_TOTAL = 3089


# ---------------------------------------------------------------------------
# IDX ingestion


def _maybe_gunzip(blob: bytes) -> bytes:
    if blob[:2] == b"\x1f\x8b":
        return gzip.decompress(blob)
    return blob


def parse_idx_images(blob: bytes) -> np.ndarray:
    """(count, rows, cols) float64 pixels in [0, 1]."""
    blob = _maybe_gunzip(blob)
    if len(blob) < 16:
        raise IdxParseError("image stream shorter than its header", len(blob))
    magic, count, rows, cols = struct.unpack_from(">IIII", blob, 0)
    if magic != 2051:
        raise IdxParseError(f"bad image magic {magic} (want 2051)", 0)
    need = 16 + count * rows * cols
    if len(blob) < need:
        raise IdxParseError(
            f"image payload truncated: header claims {count} images "
            f"({need} bytes), stream has {len(blob)}", len(blob))
    pixels = np.frombuffer(blob, dtype=np.uint8, count=count * rows * cols,
                           offset=16)
    return pixels.reshape(count, rows, cols).astype(np.float64) / 255.0


def parse_idx_labels(blob: bytes) -> np.ndarray:
    blob = _maybe_gunzip(blob)
    if len(blob) < 8:
        raise IdxParseError("label stream shorter than its header", len(blob))
    magic, count = struct.unpack_from(">II", blob, 0)
    if magic != 2049:
        raise IdxParseError(f"bad label magic {magic} (want 2049)", 0)
    if len(blob) < 8 + count:
        raise IdxParseError(
            f"label payload truncated: header claims {count} labels", len(blob))
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=8).copy()


def parse_idx(image_blob: bytes, label_blob: bytes):
    images = parse_idx_images(image_blob)
    labels = parse_idx_labels(label_blob)
    if len(images) != len(labels):
        raise IdxParseError(
            f"image count {len(images)} != label count {len(labels)}", 0)
    return images, labels


def load_idx_pair(image_path, label_path):
    with open(image_path, "rb") as fh:
        image_blob = fh.read()
    with open(label_path, "rb") as fh:
        label_blob = fh.read()
    return parse_idx(image_blob, label_blob)


# ---------------------------------------------------------------------------
# filtering / downsampling


def filter_digits(images, labels, keep=KEEP_DIGITS):
    mask = np.isin(labels, keep)
    return images[mask], labels[mask]


def _overlap_matrix(out_size: int, in_size: int) -> np.ndarray:
    """Row-stochastic matrix of cell-overlap fractions for area resampling."""
    scale = in_size / out_size
    mat = np.zeros((out_size, in_size))
    for i in range(out_size):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(np.floor(lo)), int(np.ceil(hi))):
            mat[i, j] = min(hi, j + 1) - max(lo, j)
    return mat / scale


_R10 = _overlap_matrix(10, 28)


def downsample(images) -> np.ndarray:
    """28x28 -> flattened 10x10 by area-weighted averaging (keeps the mean
    exactly and maps constants to constants)."""
    images = np.asarray(images, dtype=np.float64)
    single = images.ndim == 2
    if single:
        images = images[None]
    if images.shape[1:] != (28, 28):
        raise ConfigurationError(f"expected 28x28 images, got {images.shape[1:]}")
    small = np.einsum("oi,bij,pj->bop", _R10, images, _R10)
    flat = small.reshape(len(small), 100)
    return flat[0] if single else flat


# ---------------------------------------------------------------------------
# splits


@dataclass
class MnistSplit:
    spec: str
    seed: int
    source_train: np.ndarray  # index arrays into the filtered corpus
    source_val: np.ndarray
    target_train: np.ndarray
    target_val: np.ndarray

    def sizes(self):
        return (len(self.source_train), len(self.source_val),
                len(self.target_train), len(self.target_val))


def make_splits(n_samples: int, spec: str, seed: int) -> MnistSplit:
    """Shuffle once with the seed, then slice source-train / source-val /
    target-train / target-val in that order."""
    if spec not in SPLIT_FRACTIONS:
        raise ConfigurationError(f"unknown data spec {spec!r} (want A or B)")
    s_frac, s_train_frac, t_train_frac = SPLIT_FRACTIONS[spec]
    s_total = int(np.floor(s_frac * n_samples))
    t_total = n_samples - s_total
    s_train = int(np.floor(s_train_frac * s_total))
    t_train = int(np.floor(t_train_frac * t_total))
    if min(s_train, s_total - s_train, t_train, t_total - t_train) < 1:
        raise ConfigurationError(
            f"{n_samples} samples are too few for data spec {spec}")
    perm = np.random.default_rng(seed).permutation(n_samples)
    split = MnistSplit(
        spec=spec,
        seed=seed,
        source_train=perm[:s_train],
        source_val=perm[s_train:s_total],
        target_train=perm[s_total:s_total + t_train],
        target_val=perm[s_total + t_train:],
    )
    if n_samples == CANONICAL_TRAIN_TOTAL and split.sizes() != CANONICAL_SIZES[spec]:
        warnings.warn(
            f"data spec {spec} sizes {split.sizes()} differ from the canonical "
            f"{CANONICAL_SIZES[spec]}")
    return split


# ---------------------------------------------------------------------------
# losses / metrics


def bce_loss(prediction, positive):
    """Binary cross entropy with the prediction clamped away from {0, 1}."""
    x = np.clip(np.asarray(prediction, dtype=np.float64),
                PRED_CLAMP, 1.0 - PRED_CLAMP)
    pos = np.asarray(positive, dtype=bool)
    return np.where(pos, -np.log(x), -np.log1p(-x))


def accuracy(predictions, digits, positive_digit):
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    digits = np.asarray(digits).reshape(-1)
    if len(predictions) == 0:
        raise ConfigurationError("accuracy of an empty sample set is undefined")
    if len(predictions) != len(digits):
        raise ConfigurationError("predictions and digits are misaligned")
    hit = (predictions >= 0.5) == (digits == positive_digit)
    return float(hit.mean())


class DigitAdapter(TaskAdapter):
    """Binary is-it-this-digit task on sigmoid outputs."""

    utility_name = "accuracy"

    def __init__(self, positive_digit: int):
        self.positive_digit = positive_digit

    def loss_and_grad(self, outputs, batch):
        digits = batch.extras["digits"]
        target = (digits == self.positive_digit).astype(np.float64)[:, None]
        x = np.clip(outputs, PRED_CLAMP, 1.0 - PRED_CLAMP)
        loss = float(np.mean(-target * np.log(x)
                             - (1.0 - target) * np.log1p(-x)))
        grad = (x - target) / (x * (1.0 - x)) / outputs.size
        return loss, grad

    def utility(self, outputs, batch):
        return accuracy(outputs, batch.extras["digits"], self.positive_digit)


# ---------------------------------------------------------------------------
# learning interface


def mnist_architecture() -> Architecture:
    from ..nn import SIGMOID

    return Architecture(
        feature_dims=[100, 50, 25],
        optimization_dims=[25, 10, 1],
        reconstruction_dims=[25, 50, 100],
        output_activation=SIGMOID,
    )


def fit_recon_standardizer(pixels) -> Standardizer:
    return Standardizer.fit(pixels)


def build_dataset(pixels, digits, stats: Standardizer, name="") -> LabeledDataset:
    """Inputs are the raw downsampled pixels; the reconstruction target is
    the same image standardized with source-train statistics."""
    return LabeledDataset(pixels, recon_targets=stats.transform(pixels),
                          extras={"digits": digits}, name=name)
