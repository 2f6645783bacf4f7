"""Dense 2-D matrix value type shared by every compute backend.

A :class:`DenseMatrix` is a row-major 2-D array of 32- or 64-bit floats.
It is the only container the hot-path math operates on: design matrices,
one-hot labels, coefficients, momenta, gradients and masks are all
DenseMatrix values. Instances are treated as immutable; backend operations
return new matrices instead of mutating their inputs.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class Precision(str, Enum):
    """Floating-point width of a matrix."""

    F32 = "f32"
    F64 = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is Precision.F32 else np.dtype(np.float64)

    @classmethod
    def from_dtype(cls, dtype) -> "Precision":
        dtype = np.dtype(dtype)
        if dtype == np.float32:
            return cls.F32
        if dtype == np.float64:
            return cls.F64
        raise TypeError(f"unsupported dtype {dtype}; DenseMatrix holds float32 or float64")


class DenseMatrix:
    """Row-major 2-D float matrix with explicit precision.

    Wraps a C-contiguous 2-D numpy array. Construction validates shape and
    dtype; the wrapped array should not be mutated afterwards (operations
    that need a different value build a new matrix).
    """

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ValueError(f"DenseMatrix requires a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"DenseMatrix dimensions must be positive, got shape {arr.shape}")
        Precision.from_dtype(arr.dtype)
        self._data = np.ascontiguousarray(arr)

    # -- construction -------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[float]], precision: Precision = Precision.F64) -> "DenseMatrix":
        return cls(np.array([list(r) for r in rows], dtype=precision.dtype))

    @classmethod
    def from_array(cls, arr, precision: Precision | None = None) -> "DenseMatrix":
        """Build from any array-like, casting to `precision` when given."""
        a = np.asarray(arr)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if precision is not None:
            a = a.astype(precision.dtype, copy=False)
        elif a.dtype not in (np.float32, np.float64):
            a = a.astype(np.float64)
        return cls(a)

    @classmethod
    def zeros(cls, rows: int, cols: int, precision: Precision = Precision.F64) -> "DenseMatrix":
        return cls(np.zeros((rows, cols), dtype=precision.dtype))

    @classmethod
    def ones(cls, rows: int, cols: int, precision: Precision = Precision.F64) -> "DenseMatrix":
        return cls(np.ones((rows, cols), dtype=precision.dtype))

    @classmethod
    def eye(cls, n: int, precision: Precision = Precision.F64) -> "DenseMatrix":
        return cls(np.eye(n, dtype=precision.dtype))

    # -- views and metadata -------------------------------------------

    @property
    def data(self) -> np.ndarray:
        """The wrapped 2-D array. Treat as read-only."""
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def precision(self) -> Precision:
        return Precision.from_dtype(self._data.dtype)

    @property
    def is_vector(self) -> bool:
        return self.rows == 1 or self.cols == 1

    def to_numpy(self) -> np.ndarray:
        """Detached copy, safe for the caller to mutate."""
        return self._data.copy()

    def astype(self, precision: Precision) -> "DenseMatrix":
        return DenseMatrix(self._data.astype(precision.dtype, copy=True))

    def reshape(self, rows: int, cols: int) -> "DenseMatrix":
        """Row-major reinterpretation; element count must be preserved."""
        if rows * cols != self.size:
            raise ValueError(f"cannot reshape {self.shape} ({self.size} elems) to ({rows}, {cols})")
        return DenseMatrix(self._data.reshape(rows, cols))

    def as_column(self) -> "DenseMatrix":
        """All elements as a single column, row-major order."""
        return self.reshape(self.size, 1)

    def copy(self) -> "DenseMatrix":
        return DenseMatrix(self._data.copy())

    def __repr__(self) -> str:
        return f"DenseMatrix({self.rows}x{self.cols}, {self.precision.value})"
