"""IDX (MNIST) file reader."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import FormatError, LengthError

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
N_CLASSES = 10

# accept both the original and the common dotted spellings, optionally gzipped
_FILE_STEMS = {
    ("train", "images"): ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    ("train", "labels"): ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    ("test", "images"): ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    ("test", "labels"): ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}
DATA_DIR_ENV = "SYNSCALE_MNIST_DIR"


@dataclass
class Batch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")
        if len(self.inputs) and (self.inputs.min() < 0 or self.inputs.max() > 1):
            raise ValueError("inputs must be normalized to [0, 1]")
        if not np.allclose(self.targets.sum(axis=1), 1.0):
            raise ValueError("every target row must sum to 1")

    def __len__(self):
        return len(self.inputs)

    @property
    def labels(self) -> np.ndarray:
        return self.targets.argmax(axis=1)


def one_hot(labels, n_classes: int = N_CLASSES) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _read(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its declared shape."""
    raw = _read(path)
    if len(raw) < 8:
        raise LengthError(f"{path}: {len(raw)} bytes is too short for an IDX header")
    magic, count = struct.unpack(">ii", raw[:8])
    if magic != expected_magic:
        raise FormatError(f"{path}: magic number {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise LengthError(f"{path}: header declares {ndim} dimensions but file ends early")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise LengthError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_mnist(images_path, labels_path) -> Batch:
    """Images flattened and scaled to [0, 1]; labels one-hot over 10 classes."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    x = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Batch(x, one_hot(labels))


def find_split(data_dir, split: str) -> tuple[Path, Path]:
    data_dir = Path(data_dir)
    found = []
    for kind in ("images", "labels"):
        for stem in _FILE_STEMS[(split, kind)]:
            hits = [data_dir / (stem + ext) for ext in ("", ".gz") if (data_dir / (stem + ext)).exists()]
            if hits:
                found.append(hits[0])
                break
        else:
            raise FileNotFoundError(f"no {split} {kind} IDX file in {data_dir}")
    return found[0], found[1]


def load_split(data_dir, split: str) -> Batch:
    return load_mnist(*find_split(data_dir, split))


def default_data_dir() -> Path | None:
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else None
