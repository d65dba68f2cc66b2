"""Dataset sources: seeded synthetic images, CIFAR-10 binary records, subsets."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

CIFAR_RECORD = 3073
CIFAR_SHAPE = (3, 32, 32)


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSource:
    kind: str = "synthetic"  # synthetic | cifar10-binary | npz
    path: str | None = None
    n_samples: int = 1250
    n_classes: int = 2
    noise: float = 0.5
    subset: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("synthetic", "cifar10-binary", "npz"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind != "synthetic" and not self.path:
            raise ValueError(f"dataset kind {self.kind!r} needs a path")
        if self.kind == "synthetic" and not 2 <= self.n_classes <= 10:
            raise ValueError("synthetic datasets have 2-10 classes")

    def fingerprint(self) -> str:
        h = hashlib.sha256(repr(sorted(self.__dict__.items())).encode())
        if self.path and os.path.exists(self.path):
            st = os.stat(self.path)
            h.update(f"{st.st_size}".encode())
        return h.hexdigest()[:16]


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray

    @property
    def input_shape(self):
        return self.x_train.shape[1:]

    @property
    def n_classes(self):
        return int(max(self.y_train.max(initial=0), self.y_val.max(initial=0))) + 1


def make_synthetic(n_samples=1250, n_classes=2, noise=0.5, seed=0, shape=(1, 8, 8)):
    """Class ``k`` images are a fixed seeded template plus Gaussian noise."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    templates = rng.normal(size=(n_classes,) + tuple(shape))
    y = np.arange(n_samples) % n_classes
    y = y[rng.permutation(n_samples)]
    x = templates[y] + noise * rng.normal(size=(n_samples,) + tuple(shape))
    return x.astype(np.float32), y.astype(np.int64)


def _index_hash(i: int) -> int:
    return int.from_bytes(hashlib.blake2b(i.to_bytes(8, "little"), digest_size=8).digest(), "little")


def split_indices(n: int, val_fraction: float = 0.2):
    """Deterministic split: indices ranked by a hash of their position."""
    order = sorted(range(n), key=_index_hash)
    n_val = int(round(n * val_fraction))
    val = np.array(sorted(order[:n_val]), dtype=np.int64)
    train = np.array(sorted(order[n_val:]), dtype=np.int64)
    return train, val


def split(x, y, val_fraction=0.2) -> Dataset:
    tr, va = split_indices(len(x), val_fraction)
    return Dataset(x[tr], y[tr], x[va], y[va])


def read_cifar10_binary(path):
    """Parse 3,073-byte records: label byte then 3x32x32 channel-planar pixels.

    Pixels are scaled to [-1, 1] as ``p/127.5 - 1``.
    """
    try:
        raw = np.fromfile(path, dtype=np.uint8)
    except OSError as e:
        raise OSError(f"cannot read dataset {path}: {e}") from e
    if raw.size % CIFAR_RECORD:
        offset = (raw.size // CIFAR_RECORD) * CIFAR_RECORD
        raise DatasetFormatError(
            f"{path}: truncated record at byte offset {offset} "
            f"(file size {raw.size} is not a multiple of {CIFAR_RECORD})"
        )
    recs = raw.reshape(-1, CIFAR_RECORD)
    labels = recs[:, 0].astype(np.int64)
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        i = int(bad[0])
        raise DatasetFormatError(f"{path}: label {labels[i]} > 9 at byte offset {i * CIFAR_RECORD}")
    pixels = recs[:, 1:].reshape((-1,) + CIFAR_SHAPE).astype(np.float32) / 127.5 - 1.0
    return pixels, labels


def write_cifar10_binary(path, images_u8, labels):
    images_u8 = np.asarray(images_u8, dtype=np.uint8).reshape(len(labels), -1)
    if images_u8.shape[1] != CIFAR_RECORD - 1:
        raise ValueError(f"images must hold {CIFAR_RECORD - 1} bytes each")
    recs = np.concatenate([np.asarray(labels, np.uint8)[:, None], images_u8], axis=1)
    recs.tofile(path)


def stratified_subset(y, size, seed=0):
    """Indices of a class-balanced deterministic subsample (sorted)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B5E7]))
    classes = np.unique(y)
    per = [np.flatnonzero(y == c) for c in classes]
    take = {int(c): 0 for c in classes}
    remaining = size
    # round-robin quota keeps class proportions as even as the data allows
    while remaining > 0 and any(take[int(c)] < len(p) for c, p in zip(classes, per)):
        for c, p in zip(classes, per):
            if remaining and take[int(c)] < len(p):
                take[int(c)] += 1
                remaining -= 1
    chosen = [rng.permutation(p)[: take[int(c)]] for c, p in zip(classes, per)]
    return np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, np.int64)


def load_dataset(source: DatasetSource) -> Dataset:
    if source.kind == "synthetic":
        x, y = make_synthetic(source.n_samples, source.n_classes, source.noise, source.seed)
    elif source.kind == "cifar10-binary":
        if not os.path.exists(source.path):
            raise OSError(f"dataset file not found: {source.path}")
        x, y = read_cifar10_binary(source.path)
    else:
        if not os.path.exists(source.path):
            raise OSError(f"dataset file not found: {source.path}")
        with np.load(source.path) as f:
            x, y = f["x"].astype(np.float32), f["y"].astype(np.int64)
    if source.subset is not None and source.subset < len(y):
        idx = stratified_subset(y, source.subset, source.seed)
        x, y = x[idx], y[idx]
    return split(x, y)
