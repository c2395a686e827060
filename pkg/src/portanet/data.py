"""MNIST (IDX) and CIFAR-10 (binary batch) loaders, plus a seeded batch iterator."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import FormatError, InputError
from .tensor import Tensor

PathLike = Union[str, Path]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
PIXEL_SCALE = np.float32(1.0 / 256.0)

CIFAR_RECORD = 3073
CIFAR_SHAPE = (3, 32, 32)
CIFAR_CLASSES = 10

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_TRAIN_GLOB = "data_batch_*.bin"
CIFAR_TEST_FILE = "test_batch.bin"


@dataclass
class Dataset:
    images: Tensor          # N x C x H x W, float32
    labels: np.ndarray      # N class ids, int64
    class_count: int
    mean: Optional[np.ndarray] = None  # per-pixel mean already subtracted, if any

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise InputError(f"labels outside [0, {self.class_count})")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, start: int, stop: Optional[int] = None) -> "Dataset":
        return Dataset(Tensor.wrap(np.ascontiguousarray(self.images.array[start:stop])),
                       self.labels[start:stop].copy(), self.class_count, self.mean)


# -- MNIST ------------------------------------------------------------------

def _read(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _idx_header(buf: bytes, magic: int, dims: int, path) -> tuple[int, ...]:
    size = 4 * (dims + 1)
    if len(buf) < size:
        raise FormatError(f"{path}: truncated IDX header")
    fields = struct.unpack(f">{dims + 1}I", buf[:size])
    if fields[0] != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return fields[1:]


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw ``uint8`` array of shape N x rows x cols."""
    buf = _read(path)
    n, rows, cols = _idx_header(buf, IDX_IMAGES_MAGIC, 3, path)
    need = 16 + n * rows * cols
    if len(buf) < need:
        raise FormatError(f"{path}: truncated payload ({len(buf)} of {need} bytes)")
    return np.frombuffer(buf, np.uint8, n * rows * cols, 16).reshape(n, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    buf = _read(path)
    (n,) = _idx_header(buf, IDX_LABELS_MAGIC, 1, path)
    if len(buf) < 8 + n:
        raise FormatError(f"{path}: truncated payload ({len(buf)} of {8 + n} bytes)")
    return np.frombuffer(buf, np.uint8, n, 8).copy()


def write_idx_images(path: PathLike, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())


def write_idx_labels(path: PathLike, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    Path(path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def load_mnist(images_path: PathLike, labels_path: PathLike) -> Dataset:
    """Pixels scaled by 1/256 into [0, 1); shape N x 1 x 28 x 28 (or whatever the file says)."""
    raw = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if raw.shape[0] != labels.size:
        raise FormatError(f"{images_path} has {raw.shape[0]} images but "
                          f"{labels_path} has {labels.size} labels")
    images = raw.astype(np.float32) * PIXEL_SCALE
    n, rows, cols = raw.shape
    return Dataset(Tensor.wrap(images.reshape(n, 1, rows, cols)), labels.astype(np.int64), 10)


# -- CIFAR-10 ---------------------------------------------------------------

def read_cifar_records(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    """(uint8 images N x 3 x 32 x 32, labels) from one binary batch file."""
    buf = _read(path)
    if len(buf) % CIFAR_RECORD:
        raise FormatError(f"{path}: size {len(buf)} is not a multiple of {CIFAR_RECORD}")
    recs = np.frombuffer(buf, np.uint8).reshape(-1, CIFAR_RECORD)
    labels = recs[:, 0].astype(np.int64)
    if labels.size and labels.max() >= CIFAR_CLASSES:
        raise FormatError(f"{path}: label byte {labels.max()} > {CIFAR_CLASSES - 1}")
    return recs[:, 1:].reshape(-1, *CIFAR_SHAPE), labels


def write_cifar_records(path: PathLike, images: np.ndarray, labels: Sequence[int]) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 3072)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    Path(path).write_bytes(np.concatenate([labels, images], axis=1).tobytes())


def mean_image(images: np.ndarray) -> np.ndarray:
    return images.mean(axis=0, dtype=np.float64).astype(np.float32)


def load_cifar10(batch_paths: Iterable[PathLike], mean: Optional[np.ndarray] = None) -> Dataset:
    """Concatenate batch files, scale by 1/256 and subtract the per-pixel mean.

    The mean is computed from these files when not given.
    """
    parts = [read_cifar_records(p) for p in batch_paths]
    if not parts:
        raise FormatError("no CIFAR-10 batch files given")
    raw = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    images = raw.astype(np.float32) * PIXEL_SCALE
    if mean is None:
        mean = mean_image(images)
    mean = np.asarray(mean, dtype=np.float32).reshape(CIFAR_SHAPE)
    images -= mean
    return Dataset(Tensor.wrap(images), labels, CIFAR_CLASSES, mean)


# -- data directories -------------------------------------------------------

def mnist_paths(data_dir: PathLike, split: str) -> tuple[Path, Path]:
    d = Path(data_dir)
    return tuple(d / name for name in MNIST_FILES[split])  # type: ignore[return-value]


def cifar_paths(data_dir: PathLike, split: str) -> list[Path]:
    d = Path(data_dir)
    if not any(d.glob(CIFAR_TRAIN_GLOB)) and (d / "cifar-10-batches-bin").is_dir():
        d = d / "cifar-10-batches-bin"
    if split == "train":
        paths = sorted(d.glob(CIFAR_TRAIN_GLOB))
    else:
        paths = [d / CIFAR_TEST_FILE]
    if not paths or not all(p.exists() for p in paths):
        raise FormatError(f"no CIFAR-10 {split} batches under {data_dir}")
    return paths


def load_split(source: str, data_dir: PathLike, split: str,
               mean: Optional[np.ndarray] = None) -> Dataset:
    if source == "mnist":
        return load_mnist(*mnist_paths(data_dir, split))
    if source == "cifar10":
        return load_cifar10(cifar_paths(data_dir, split), mean)
    raise InputError(f"source {source!r} cannot be loaded from a directory")


def synthetic(count: int, shape: Sequence[int], classes: int, seed: int = 0) -> Dataset:
    """Uniform random images and labels, for timing runs without a dataset."""
    rng = np.random.default_rng(seed)
    images = rng.random((count, *shape), dtype=np.float32)
    labels = rng.integers(0, classes, count)
    return Dataset(Tensor.wrap(images), labels, classes)


class BatchIterator:
    """Sequential slices of a per-epoch permutation.

    Epoch ``e`` uses the permutation drawn from ``(seed, e)``, so two
    iterators with the same seed yield the same batches. A batch that runs
    past the end of an epoch continues into the next one.
    """

    def __init__(self, ds: Dataset, batch: int, seed: int = 0, shuffle: bool = True):
        if not 1 <= batch <= len(ds):
            raise InputError(f"batch size {batch} must be in [1, {len(ds)}]")
        self.ds = ds
        self.batch = batch
        self.seed = seed
        self.shuffle = shuffle
        self.epoch = 0
        self.cursor = 0
        self.order = self._permutation(0)

    def _permutation(self, epoch: int) -> np.ndarray:
        if not self.shuffle:
            return np.arange(len(self.ds))
        return np.random.default_rng([self.seed, epoch]).permutation(len(self.ds))

    def next_indices(self) -> np.ndarray:
        picked = []
        need = self.batch
        while need:
            take = min(need, len(self.order) - self.cursor)
            picked.append(self.order[self.cursor:self.cursor + take])
            self.cursor += take
            need -= take
            if self.cursor == len(self.order):
                self.epoch += 1
                self.cursor = 0
                self.order = self._permutation(self.epoch)
        return np.concatenate(picked)

    def next_batch(self) -> tuple[np.ndarray, np.ndarray]:
        idx = self.next_indices()
        return self.ds.images.array[idx], self.ds.labels[idx]

    def __iter__(self):
        return self

    def __next__(self):
        return self.next_batch()


def next_batch(it: BatchIterator) -> tuple[np.ndarray, np.ndarray]:
    return it.next_batch()


def write_mnist_dir(out_dir: PathLike, images: np.ndarray, labels: np.ndarray,
                    test_count: int, seed: int = 0) -> Path:
    """Shuffle raw uint8 images (N x 28 x 28) and write train/t10k IDX files.

    The last ``test_count`` samples of the shuffled order become the test split.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    if not 0 < test_count < len(labels):
        raise InputError(f"test_count must be in (0, {len(labels)})")
    order = np.random.default_rng(seed).permutation(len(labels))
    images, labels = images[order], labels[order]
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    cut = len(labels) - test_count
    for split, sl in (("train", slice(0, cut)), ("test", slice(cut, None))):
        img_path, lab_path = mnist_paths(d, split)
        write_idx_images(img_path, images[sl])
        write_idx_labels(lab_path, labels[sl])
    return d
