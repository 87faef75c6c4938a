"""MNIST IDX parsing, the train/test split, and deterministic mini-batches.

The IDX container is the standard big-endian format: a 4-byte magic number,
big-endian 32-bit dimension fields, then raw unsigned bytes. Images normalize
to [0, 1] by dividing by 255.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .nets import Batch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Normalized images with labels and a split tag."""

    images: np.ndarray  # (N, 784) float64 in [0, 1]
    labels: np.ndarray  # (N,) ints in 0..9
    split_tag: str = "train"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 2:
            raise ValueError("images must be 2-D (N, pixels)")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image count does not equal label count")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("pixels must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise ValueError("labels must lie in 0..9")

    def __len__(self):
        return self.images.shape[0]


@dataclass
class BatchPlan:
    """Mini-batch schedule: size plus the (seed, epoch) pair fixing the order."""

    batch_size: int
    shuffle_seed: int = 0
    epoch: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def parse_idx_images(data):
    """Parse an IDX image byte stream into an (N, rows*cols) matrix in [0, 1]."""
    if len(data) < 16:
        raise ValueError("truncated IDX image stream (no header)")
    magic, n, rows, cols = struct.unpack(">4i", data[:16])
    if magic != IMAGE_MAGIC:
        raise ValueError(f"bad magic 0x{magic:08x} for IDX images")
    if n < 0 or rows <= 0 or cols <= 0:
        raise ValueError("IDX header dimensions out of range")
    count = n * rows * cols
    body = data[16:]
    if len(body) < count:
        raise ValueError(f"truncated IDX image stream: need {count} bytes, have {len(body)}")
    pixels = np.frombuffer(body[:count], dtype=np.uint8)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data):
    """Parse an IDX label byte stream into an integer vector."""
    if len(data) < 8:
        raise ValueError("truncated IDX label stream (no header)")
    magic, n = struct.unpack(">2i", data[:8])
    if magic != LABEL_MAGIC:
        raise ValueError(f"bad magic 0x{magic:08x} for IDX labels")
    if n < 0:
        raise ValueError("IDX header dimensions out of range")
    body = data[8:]
    if len(body) < n:
        raise ValueError(f"truncated IDX label stream: need {n} bytes, have {len(body)}")
    return np.frombuffer(body[:n], dtype=np.uint8).astype(np.int64)


def load_idx_file(path, kind):
    """Read and parse one IDX file from disk ('images' or 'labels')."""
    with open(path, "rb") as fh:
        data = fh.read()
    if kind == "images":
        return parse_idx_images(data)
    if kind == "labels":
        return parse_idx_labels(data)
    raise ValueError(f"unknown IDX kind {kind!r}")


def standard_split(train_images, train_labels, test_images, test_labels,
                   train_cap=50_000):
    """Build the train/test Datasets, truncating training data to train_cap.

    The training file is cut to its first train_cap samples (the paper's
    50,000 by default); the test arrays are taken whole.
    """
    n_avail = train_images.shape[0]
    if train_cap > n_avail:
        raise ValueError(f"train_cap {train_cap} exceeds available {n_avail} samples")
    train = Dataset(train_images[:train_cap], train_labels[:train_cap], "train")
    test = Dataset(test_images, test_labels, "test")
    return train, test


def epoch_permutation(n, shuffle_seed, epoch):
    """The sample order used for one epoch; fixed by (seed, epoch)."""
    rng = np.random.default_rng(np.random.SeedSequence((shuffle_seed, epoch)))
    return rng.permutation(n)


def iter_batches(inputs, targets, batch_size, shuffle_seed, epoch):
    """Yield Batch objects over a seeded permutation of the rows."""
    order = epoch_permutation(inputs.shape[0], shuffle_seed, epoch)
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield Batch(inputs[idx], targets[idx])


def minibatches(dataset, plan, reconstruction=False):
    """Mini-batches for one epoch of the dataset, per the plan.

    With reconstruction=True the targets are the images themselves
    (autoencoder training); otherwise targets are the class labels.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    targets = dataset.images if reconstruction else dataset.labels
    yield from iter_batches(dataset.images, targets, plan.batch_size,
                            plan.shuffle_seed, plan.epoch)


def full_batch(dataset, reconstruction=False):
    """The whole dataset as one Batch (for full-batch loss evaluation)."""
    targets = dataset.images if reconstruction else dataset.labels
    return Batch(dataset.images, targets)
