"""Reference backend: numpy on the host CPU. Always available.

This is the implementation every other backend is checked against. numpy
delegates the matrix products to BLAS and its reductions use pairwise
summation in a fixed traversal order, so results are deterministic for
identical inputs within a process. Golden tests rely on that.
"""

from __future__ import annotations

import numpy as np

from ..matrix import DenseMatrix
from .base import Backend, BinaryFn, UnaryFn


class ReferenceBackend(Backend):
    name = "reference"
    thread_safe = True

    def _matmul(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        return DenseMatrix(a.data @ b.data)

    def _matmul_transpose_left(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        # a.data.T is a view; BLAS handles the transposed layout directly.
        return DenseMatrix(a.data.T @ b.data)

    def _row_softmax(self, a: DenseMatrix) -> DenseMatrix:
        shifted = a.data - a.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return DenseMatrix(e / e.sum(axis=1, keepdims=True))

    def _row_log_softmax(self, a: DenseMatrix) -> DenseMatrix:
        shifted = a.data - a.data.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return DenseMatrix(shifted - lse)

    def _elem_unary(self, a: DenseMatrix, fn: UnaryFn) -> DenseMatrix:
        x = a.data
        if fn is UnaryFn.LOG:
            out = np.log(x)
        elif fn is UnaryFn.NEG_LOG1P_SQUARE:
            out = -np.log1p(np.square(x))
        elif fn is UnaryFn.CAUCHY_GRAD_TERM:
            out = (-2.0 * x) / (1.0 + np.square(x))
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown unary fn {fn!r}")
        return DenseMatrix(out.astype(x.dtype, copy=False))

    def _elem_binary(self, a: DenseMatrix, b: DenseMatrix, fn: BinaryFn) -> DenseMatrix:
        if fn is BinaryFn.MUL:
            return DenseMatrix(a.data * b.data)
        if fn is BinaryFn.SUB:
            return DenseMatrix(a.data - b.data)
        if fn is BinaryFn.ADD:
            return DenseMatrix(a.data + b.data)
        raise ValueError(f"unknown binary fn {fn!r}")  # pragma: no cover

    def _axpy(self, alpha: float, x: DenseMatrix, y: DenseMatrix) -> DenseMatrix:
        dtype = x.data.dtype
        return DenseMatrix(dtype.type(alpha) * x.data + y.data)

    def _sum_all(self, a: DenseMatrix) -> float:
        return a.data.sum()

    def _dot_self(self, v: DenseMatrix) -> float:
        flat = v.data.ravel()
        return flat @ flat
