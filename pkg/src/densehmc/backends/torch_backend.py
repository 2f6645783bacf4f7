"""Optional torch backend.

Satisfies the same contract as the reference backend but runs each kernel
through torch, on CUDA when available and the CPU otherwise. Matrices cross
the boundary as numpy arrays on every call, so on a machine without an
accelerator this backend is mostly useful as a second, independent
implementation for the conformance suite and the timing harness's ratio
column.

torch is an optional dependency; importing this module without it raises
ImportError, and the registry simply leaves the backend unlisted.
"""

from __future__ import annotations

import numpy as np
import torch

from ..matrix import DenseMatrix
from .base import Backend, BinaryFn, UnaryFn


class TorchBackend(Backend):
    name = "torch"
    thread_safe = True

    def __init__(self, device: str | None = None):
        self.device = torch.device(device) if device else (
            torch.device("cuda") if torch.cuda.is_available() else torch.device("cpu")
        )

    def _to(self, m: DenseMatrix) -> torch.Tensor:
        return torch.from_numpy(np.asarray(m.data)).to(self.device)

    def _from(self, t: torch.Tensor) -> DenseMatrix:
        return DenseMatrix(t.cpu().numpy())

    def _matmul(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        return self._from(self._to(a) @ self._to(b))

    def _matmul_transpose_left(self, a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
        return self._from(self._to(a).T @ self._to(b))

    def _row_softmax(self, a: DenseMatrix) -> DenseMatrix:
        # torch.softmax already max-subtracts internally.
        return self._from(torch.softmax(self._to(a), dim=1))

    def _row_log_softmax(self, a: DenseMatrix) -> DenseMatrix:
        return self._from(torch.log_softmax(self._to(a), dim=1))

    def _elem_unary(self, a: DenseMatrix, fn: UnaryFn) -> DenseMatrix:
        t = self._to(a)
        if fn is UnaryFn.LOG:
            out = torch.log(t)
        elif fn is UnaryFn.NEG_LOG1P_SQUARE:
            out = -torch.log1p(t * t)
        elif fn is UnaryFn.CAUCHY_GRAD_TERM:
            out = (-2.0 * t) / (1.0 + t * t)
        else:  # pragma: no cover
            raise ValueError(f"unknown unary fn {fn!r}")
        return self._from(out)

    def _elem_binary(self, a: DenseMatrix, b: DenseMatrix, fn: BinaryFn) -> DenseMatrix:
        ta, tb = self._to(a), self._to(b)
        if fn is BinaryFn.MUL:
            return self._from(ta * tb)
        if fn is BinaryFn.SUB:
            return self._from(ta - tb)
        if fn is BinaryFn.ADD:
            return self._from(ta + tb)
        raise ValueError(f"unknown binary fn {fn!r}")  # pragma: no cover

    def _axpy(self, alpha: float, x: DenseMatrix, y: DenseMatrix) -> DenseMatrix:
        return self._from(self._to(y).add(self._to(x), alpha=alpha))

    def _sum_all(self, a: DenseMatrix) -> float:
        return self._to(a).sum().item()

    def _dot_self(self, v: DenseMatrix) -> float:
        flat = self._to(v).reshape(-1)
        return torch.dot(flat, flat).item()
