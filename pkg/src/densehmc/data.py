"""Dataset ingestion and construction.

Covers the IDX binary image/label container (the MNIST distribution
format), delimited text with a named label column, synthetic data drawn
from the softmax generative model, one-hot encoding, intercept
augmentation, positional train/test splitting, and a small self-describing
binary container for persisting matrices exactly.
"""

from __future__ import annotations

import csv
import gzip
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrix import DenseMatrix, Precision
from .model import Dataset

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# Refuse IDX payloads beyond this many elements; anything larger is a
# corrupt or hostile header, not a dataset this package handles.
IDX_MAX_ELEMS = 10**9


class IdxError(ValueError):
    """Base class for IDX parsing failures."""


class IdxMagicError(IdxError):
    """The file does not start with a known IDX magic number."""


class IdxTruncatedError(IdxError):
    """The file ends before the header or payload is complete."""


class IdxDimensionError(IdxError):
    """Declared dimensions are implausibly large."""


@dataclass(frozen=True)
class RawImageSet:
    """Decoded IDX image payload: `count` images of height x width bytes."""

    count: int
    height: int
    width: int
    pixels: np.ndarray  # uint8, shape (count, height, width)

    def __post_init__(self):
        if self.pixels.shape != (self.count, self.height, self.width):
            raise ValueError("pixel buffer does not match declared dimensions")


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic-data recipe: X and B entries are i.i.d. N(0, coef_sd^2).

    The default standard deviation is sqrt(1e-3), i.e. variance 1e-3.
    Labels are drawn from the softmax probabilities of X @ B with the last
    coefficient column pinned to zero.
    """

    n: int
    p: int
    k: int
    coef_sd: float = math.sqrt(1e-3)
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("n: must be positive")
        if self.p < 1:
            raise ValueError("p: must be positive")
        if self.k < 2:
            raise ValueError("k: must be at least 2")
        if not self.coef_sd > 0:
            raise ValueError("coef_sd: must be positive")


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":  # gzip, as MNIST ships
        raw = gzip.decompress(raw)
    return raw


def load_idx(path):
    """Parse an IDX file.

    Returns a :class:`RawImageSet` for image files (magic 0x00000803) and a
    1-D integer numpy array for label files (magic 0x00000801).
    """
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the 4-byte magic")
    magic = int.from_bytes(raw[:4], "big")
    if magic not in (IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC):
        raise IdxMagicError(f"{path}: unrecognized magic 0x{magic:08x}")
    ndims = 3 if magic == IDX_IMAGE_MAGIC else 1
    header_len = 4 + 4 * ndims
    if len(raw) < header_len:
        raise IdxTruncatedError(f"{path}: header truncated ({len(raw)} bytes)")
    dims = [int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndims)]
    total = math.prod(dims)
    if total > IDX_MAX_ELEMS:
        raise IdxDimensionError(f"{path}: declared dimensions {dims} exceed the element cap")
    payload = raw[header_len:]
    if len(payload) < total:
        raise IdxTruncatedError(f"{path}: payload has {len(payload)} bytes, expected {total}")
    data = np.frombuffer(payload[:total], dtype=np.uint8)
    if magic == IDX_LABEL_MAGIC:
        return data.astype(np.int64)
    count, height, width = dims
    return RawImageSet(count, height, width, data.reshape(count, height, width))


def write_idx(path, value) -> None:
    """Inverse of :func:`load_idx`; used to build fixtures."""
    if isinstance(value, RawImageSet):
        header = IDX_IMAGE_MAGIC.to_bytes(4, "big")
        for d in (value.count, value.height, value.width):
            header += int(d).to_bytes(4, "big")
        payload = value.pixels.astype(np.uint8).tobytes()
    else:
        labels = np.asarray(value)
        header = IDX_LABEL_MAGIC.to_bytes(4, "big") + len(labels).to_bytes(4, "big")
        payload = labels.astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def to_design(
    images: RawImageSet,
    scale: bool = True,
    intercept: bool = True,
    standardize: bool = False,
    precision: Precision = Precision.F64,
) -> DenseMatrix:
    """Flatten images row-major into a design matrix.

    scale       divide pixel values by 255 so features lie in [0, 1].
    intercept   prepend a column of ones (p becomes h*w + 1).
    standardize center and scale each pixel column by its own mean/sd
                (constant columns are left centered only); off by default.
    """
    if images.count < 1:
        raise ValueError("empty image set")
    flat = images.pixels.reshape(images.count, images.height * images.width)
    x = flat.astype(precision.dtype)
    if scale:
        x = x / precision.dtype.type(255.0)
    if standardize:
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        x = (x - mean) / sd
    if intercept:
        x = np.hstack([np.ones((images.count, 1), dtype=precision.dtype), x])
    return DenseMatrix(x.astype(precision.dtype, copy=False))


def one_hot(labels, k: int, precision: Precision = Precision.F64) -> DenseMatrix:
    """Encode integer labels in [0, k) as one-hot rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = int(labels[(labels < 0) | (labels >= k)][0])
        raise ValueError(f"label {bad} outside [0, {k})")
    y = np.zeros((labels.size, k), dtype=precision.dtype)
    y[np.arange(labels.size), labels] = 1.0
    return DenseMatrix(y)


def synth_generate(spec: SynthSpec, precision: Precision = Precision.F64) -> tuple[Dataset, DenseMatrix]:
    """Draw a synthetic dataset and return it with the generating B.

    X[i,j] and B[j,k] are i.i.d. N(0, coef_sd^2); B's last column is zeroed
    and each label is a categorical draw from softmax(x_i @ B).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dtype = precision.dtype
    x = rng.normal(0.0, spec.coef_sd, (spec.n, spec.p)).astype(dtype)
    b = rng.normal(0.0, spec.coef_sd, (spec.p, spec.k)).astype(dtype)
    b[:, -1] = 0.0

    logits = x @ b
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    u = rng.uniform(size=spec.n)
    labels = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    labels = np.minimum(labels, spec.k - 1)  # guard the u == 1 edge

    dataset = Dataset(DenseMatrix(x), one_hot(labels, spec.k, precision))
    return dataset, DenseMatrix(b)


def split(data: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """Order-preserving prefix/suffix split, position based."""
    if not 0 < n_train < data.n:
        raise ValueError(f"n_train must lie strictly between 0 and {data.n}, got {n_train}")
    xd, yd = data.x.data, data.y.data
    train = Dataset(DenseMatrix(xd[:n_train].copy()), DenseMatrix(yd[:n_train].copy()))
    test = Dataset(DenseMatrix(xd[n_train:].copy()), DenseMatrix(yd[n_train:].copy()))
    return train, test


def load_csv_dataset(
    path,
    label_col: str,
    k: int | None = None,
    delimiter: str = ",",
    intercept: bool = False,
    precision: Precision = Precision.F64,
) -> Dataset:
    """Load a delimited text file with a header row into a Dataset.

    Every column except `label_col` becomes a feature, in header order.
    Labels must be integers in [0, K); K defaults to max(label) + 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if label_col not in header:
            raise ValueError(f"{path}: no column named '{label_col}' in header {header}")
        label_idx = header.index(label_col)
        feats: list[list[float]] = []
        labels: list[int] = []
        for row in reader:
            if not row:
                continue
            labels.append(int(float(row[label_idx])))
            feats.append([float(v) for i, v in enumerate(row) if i != label_idx])
    if not feats:
        raise ValueError(f"{path}: no data rows")
    x = np.asarray(feats, dtype=precision.dtype)
    if intercept:
        x = np.hstack([np.ones((x.shape[0], 1), dtype=precision.dtype), x])
    n_classes = k if k is not None else max(labels) + 1
    return Dataset(DenseMatrix(x), one_hot(np.asarray(labels), n_classes, precision))


# -- exact binary matrix container -------------------------------------

_MATRIX_TAG = b"DHM1"


def save_matrix(path, m: DenseMatrix) -> None:
    """Write a matrix as a text shape header plus little-endian payload."""
    header = f"DHM1 {m.rows} {m.cols} {m.precision.value}\n".encode("ascii")
    dtype = "<f4" if m.precision is Precision.F32 else "<f8"
    Path(path).write_bytes(header + m.data.astype(dtype, copy=False).tobytes())


def load_matrix(path) -> DenseMatrix:
    """Inverse of :func:`save_matrix`."""
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0 or not raw.startswith(_MATRIX_TAG):
        raise ValueError(f"{path}: not a DHM1 matrix file")
    parts = raw[:newline].decode("ascii").split()
    if len(parts) != 4:
        raise ValueError(f"{path}: malformed header {parts}")
    rows, cols = int(parts[1]), int(parts[2])
    precision = Precision(parts[3])
    dtype = "<f4" if precision is Precision.F32 else "<f8"
    payload = raw[newline + 1 :]
    expected = rows * cols * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise ValueError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=dtype).astype(precision.dtype).reshape(rows, cols)
    return DenseMatrix(data.copy())
