"""Compute-backend contract.

Every hot-path operation in the package is one of the methods below, so a
backend only has to provide dense matrix-matrix products, a handful of
element-wise kernels, row-wise (log-)softmax and two reductions. The public
methods validate shapes and precisions once, uniformly, then dispatch to the
backend-specific `_impl` hooks.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum

from ..matrix import DenseMatrix, Precision


class BackendError(Exception):
    """Base class for contract violations raised by backend operations."""


class ShapeMismatchError(BackendError):
    """Operand shapes are incompatible for the requested operation."""

    def __init__(self, op: str, a_shape, b_shape, detail: str = ""):
        self.op = op
        self.a_shape = tuple(a_shape)
        self.b_shape = tuple(b_shape)
        msg = f"{op}: incompatible shapes {self.a_shape} and {self.b_shape}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class PrecisionMismatchError(BackendError):
    """Operands carry different floating-point precisions."""


class DomainError(BackendError):
    """An element-wise function was applied outside its domain."""

    def __init__(self, op: str, index: tuple[int, int], value: float):
        self.index = index
        self.value = value
        super().__init__(f"{op}: domain violation at entry {index} (value {value!r})")


class UnaryFn(Enum):
    """Element-wise unary kernels.

    LOG                natural log, strictly positive input required
    NEG_LOG1P_SQUARE   x -> -log(1 + x^2)
    CAUCHY_GRAD_TERM   x -> -2x / (1 + x^2)
    """

    LOG = "log"
    NEG_LOG1P_SQUARE = "neg_log1p_square"
    CAUCHY_GRAD_TERM = "cauchy_grad_term"


class BinaryFn(Enum):
    """Element-wise binary kernels on same-shape operands."""

    MUL = "mul"
    SUB = "sub"
    ADD = "add"


class Backend(ABC):
    """Abstract dense-matrix compute backend.

    Subclasses set `name`, `supports_precision` and `thread_safe`, and
    implement the `_impl` hooks. All operations return new matrices; inputs
    are never mutated.
    """

    name: str = "abstract"
    supports_precision: frozenset[Precision] = frozenset({Precision.F32, Precision.F64})
    #: Whether one instance tolerates concurrent calls from multiple threads.
    thread_safe: bool = True

    # -- shared validation ---------------------------------------------

    def _require_precision(self, op: str, *ms: DenseMatrix) -> None:
        precisions = {m.precision for m in ms}
        if len(precisions) > 1:
            raise PrecisionMismatchError(f"{op}: mixed precisions {sorted(p.value for p in precisions)}")
        (p,) = precisions
        if p not in self.supports_precision:
            raise PrecisionMismatchError(f"{op}: backend '{self.name}' does not support {p.value}")

    @staticmethod
    def _require_same_shape(op: str, a: DenseMatrix, b: DenseMatrix) -> None:
        if a.shape != b.shape:
            raise ShapeMismatchError(op, a.shape, b.shape, "shapes must match")

    # -- contract operations -------------------------------------------

    def matmul(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        """Matrix product A[m,k] @ B[k,n] -> [m,n]."""
        self._require_precision("matmul", a, b)
        if a.cols != b.rows:
            raise ShapeMismatchError("matmul", a.shape, b.shape, "inner dimensions differ")
        return self._matmul(a, b)

    def matmul_transpose_left(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        """A^T @ B for A[k,m], B[k,n] -> [m,n], without materializing A^T."""
        self._require_precision("matmul_transpose_left", a, b)
        if a.rows != b.rows:
            raise ShapeMismatchError("matmul_transpose_left", a.shape, b.shape, "row counts differ")
        return self._matmul_transpose_left(a, b)

    def row_softmax(self, a: DenseMatrix) -> DenseMatrix:
        """Per-row softmax. The row maximum is always subtracted first so
        entries of magnitude ~1e3 normalize without overflow."""
        self._require_precision("row_softmax", a)
        return self._row_softmax(a)

    def row_log_softmax(self, a: DenseMatrix) -> DenseMatrix:
        """Per-row log-softmax: (a - rowmax) - log(sum(exp(a - rowmax))).

        Equal to log(row_softmax(a)) analytically but never underflows to
        log(0), which is what the log-likelihood path needs.
        """
        self._require_precision("row_log_softmax", a)
        return self._row_log_softmax(a)

    def elem_unary(self, a: DenseMatrix, fn: UnaryFn) -> DenseMatrix:
        """Apply an element-wise unary kernel."""
        self._require_precision("elem_unary", a)
        if fn is UnaryFn.LOG:
            self._check_log_domain(a)
        return self._elem_unary(a, fn)

    def elem_binary(self, a: DenseMatrix, b: DenseMatrix, fn: BinaryFn) -> DenseMatrix:
        """Combine same-shape matrices element-wise."""
        self._require_precision("elem_binary", a, b)
        self._require_same_shape(f"elem_binary[{fn.value}]", a, b)
        return self._elem_binary(a, b, fn)

    def axpy(self, alpha: float, x: DenseMatrix, y: DenseMatrix) -> DenseMatrix:
        """alpha * X + Y on same-shape matrices."""
        self._require_precision("axpy", x, y)
        self._require_same_shape("axpy", x, y)
        return self._axpy(float(alpha), x, y)

    def sum_all(self, a: DenseMatrix) -> float:
        """Sum of every entry, accumulated in a fixed order per backend."""
        self._require_precision("sum_all", a)
        return float(self._sum_all(a))

    def dot_self(self, v: DenseMatrix) -> float:
        """Sum of squared entries of a single-row or single-column matrix."""
        self._require_precision("dot_self", v)
        if not v.is_vector:
            raise ShapeMismatchError("dot_self", v.shape, (v.size, 1), "expects a vector")
        return float(self._dot_self(v))

    # -- backend hooks ---------------------------------------------------

    def _check_log_domain(self, a: DenseMatrix) -> None:
        import numpy as np

        data = a.data
        if not np.all(data > 0):
            idx = tuple(int(i) for i in np.argwhere(~(data > 0))[0])
            raise DomainError("elem_unary[log]", idx, float(data[idx]))

    @abstractmethod
    def _matmul(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix: ...

    @abstractmethod
    def _matmul_transpose_left(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix: ...

    @abstractmethod
    def _row_softmax(self, a: DenseMatrix) -> DenseMatrix: ...

    @abstractmethod
    def _row_log_softmax(self, a: DenseMatrix) -> DenseMatrix: ...

    @abstractmethod
    def _elem_unary(self, a: DenseMatrix, fn: UnaryFn) -> DenseMatrix: ...

    @abstractmethod
    def _elem_binary(self, a: DenseMatrix, b: DenseMatrix, fn: BinaryFn) -> DenseMatrix: ...

    @abstractmethod
    def _axpy(self, alpha: float, x: DenseMatrix, y: DenseMatrix) -> DenseMatrix: ...

    @abstractmethod
    def _sum_all(self, a: DenseMatrix) -> float: ...

    @abstractmethod
    def _dot_self(self, v: DenseMatrix) -> float: ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__} '{self.name}'>"
