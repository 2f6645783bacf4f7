"""Bayesian multinomial regression target.

The model classifies each observation into one of K classes through a
row-wise softmax of X @ B, with a standard Cauchy prior on every
coefficient and the last class's coefficient column pinned to zero for
identifiability. Both the log-posterior kernel and its gradient are pure
compositions of backend operations, which is what makes the sampler's hot
path portable across backends:

    log kernel  = sum(Y * log_softmax(X @ B)) + sum(-log(1 + B^2))
    gradient    = (X^T (Y - softmax(X @ B)) + dPrior(B)) * M

where dPrior(x) = -2x / (1 + x^2) and M zeroes the constrained column.
The gradient's prior term sign follows from differentiating the log kernel
and is confirmed by the finite-difference suite in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .backends import Backend, BinaryFn, UnaryFn, get_backend
from .matrix import DenseMatrix, Precision


def _default_backend(backend: Backend | None) -> Backend:
    return backend if backend is not None else get_backend("reference")


@dataclass(frozen=True)
class Dataset:
    """Design matrix paired with one-hot labels.

    x: [n, p] features (intercept column included when the loader added one).
    y: [n, K] one-hot class indicators, exactly one 1 per row.
    """

    x: DenseMatrix
    y: DenseMatrix

    def __post_init__(self):
        if self.x.rows != self.y.rows:
            raise ValueError(f"X has {self.x.rows} rows but Y has {self.y.rows}")
        if self.x.precision != self.y.precision:
            raise ValueError("X and Y must share a precision")
        ydata = self.y.data
        if not np.all((ydata == 0) | (ydata == 1)):
            raise ValueError("Y entries must be exactly 0 or 1")
        if not np.all(ydata.sum(axis=1) == 1):
            bad = int(np.argwhere(ydata.sum(axis=1) != 1)[0][0])
            raise ValueError(f"Y row {bad} is not one-hot")

    @property
    def n(self) -> int:
        return self.x.rows

    @property
    def p(self) -> int:
        return self.x.cols

    @property
    def k(self) -> int:
        return self.y.cols

    @property
    def labels(self) -> np.ndarray:
        """Integer class labels recovered from the one-hot rows."""
        return self.y.data.argmax(axis=1)


def identifiability_mask(p: int, k: int, precision: Precision = Precision.F64) -> DenseMatrix:
    """0/1 matrix that zeroes the reference class's column (the K-th)."""
    m = np.ones((p, k), dtype=precision.dtype)
    m[:, -1] = 0.0
    return DenseMatrix(m)


def zero_coefficients(p: int, k: int, precision: Precision = Precision.F64) -> DenseMatrix:
    """All-zero coefficient matrix; trivially satisfies the constraint."""
    return DenseMatrix.zeros(p, k, precision)


def check_reference_column_zero(b: DenseMatrix) -> None:
    """Raise if the constrained (last) column is not identically zero."""
    if np.any(b.data[:, -1] != 0.0):
        raise ValueError("coefficient matrix violates the zero reference-class column")


def softmax_probs(x: DenseMatrix, b: DenseMatrix, backend: Backend | None = None) -> DenseMatrix:
    """Class probabilities for every observation: row_softmax(X @ B)."""
    be = _default_backend(backend)
    return be.row_softmax(be.matmul(x, b))


def log_likelihood(data: Dataset, b: DenseMatrix, backend: Backend | None = None) -> float:
    """Multinomial log-likelihood of the dataset under coefficients B.

    Computed as sum(Y * log_softmax(X @ B)); the log-softmax path keeps the
    observed-class log-probabilities finite even when the softmax itself
    would underflow.
    """
    be = _default_backend(backend)
    logp = be.row_log_softmax(be.matmul(data.x, b))
    return be.sum_all(be.elem_binary(data.y, logp, BinaryFn.MUL))


def log_prior_kernel(b: DenseMatrix, backend: Backend | None = None) -> float:
    """Sum of -log(1 + beta^2) over all entries (Cauchy prior kernel).

    The constrained column is all zeros and contributes exactly 0, so it is
    summed along with everything else.
    """
    be = _default_backend(backend)
    return be.sum_all(be.elem_unary(b, UnaryFn.NEG_LOG1P_SQUARE))


def log_kernel(data: Dataset, b: DenseMatrix, backend: Backend | None = None) -> float:
    """Unnormalized log-posterior: log-likelihood plus prior kernel."""
    return log_likelihood(data, b, backend) + log_prior_kernel(b, backend)


def grad_log_kernel(
    data: Dataset,
    b: DenseMatrix,
    mask: DenseMatrix | None = None,
    backend: Backend | None = None,
) -> DenseMatrix:
    """Gradient of the log kernel with respect to B.

    X^T (Y - softmax(X @ B)) plus the prior term -2B/(1+B^2), element-wise
    multiplied by `mask` when one is given. Passing mask=None evaluates the
    unconstrained gradient (the timing harness's "unmasked" variant); the
    constrained column is then generally nonzero.
    """
    be = _default_backend(backend)
    probs = softmax_probs(data.x, b, be)
    resid = be.elem_binary(data.y, probs, BinaryFn.SUB)
    grad = be.matmul_transpose_left(data.x, resid)
    grad = be.elem_binary(grad, be.elem_unary(b, UnaryFn.CAUCHY_GRAD_TERM), BinaryFn.ADD)
    if mask is not None:
        grad = be.elem_binary(grad, mask, BinaryFn.MUL)
    return grad


def posterior_mean_probs(
    x_new: DenseMatrix,
    samples: Iterable[DenseMatrix],
    backend: Backend | None = None,
) -> DenseMatrix:
    """Average softmax probabilities over retained posterior draws."""
    be = _default_backend(backend)
    total: DenseMatrix | None = None
    count = 0
    for b in samples:
        probs = softmax_probs(x_new, b, be)
        total = probs if total is None else be.elem_binary(total, probs, BinaryFn.ADD)
        count += 1
    if total is None:
        raise ValueError("predict requires at least one retained sample")
    return be.axpy(1.0 / count - 1.0, total, total)  # total / count


def predict(
    x_new: DenseMatrix,
    samples,
    backend: Backend | None = None,
) -> np.ndarray:
    """Class index per row of `x_new`: argmax of the posterior-mean softmax.

    `samples` is anything with a `positions` attribute (a sample store) or a
    plain sequence of coefficient matrices. Ties go to the lowest class
    index, so the output is deterministic.
    """
    draws: Sequence[DenseMatrix] = getattr(samples, "positions", samples)
    if len(draws) == 0:
        raise ValueError("predict requires at least one retained sample")
    mean_probs = posterior_mean_probs(x_new, draws, backend)
    return mean_probs.data.argmax(axis=1)


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predicted == np.asarray(labels)))


@dataclass
class Target:
    """Differentiable log-density contract consumed by the samplers.

    Positions are DenseMatrix values of the given shape. `mask`, when set,
    marks coordinates the sampler must hold at exactly zero.
    """

    shape: tuple[int, int]
    log_kernel: Callable[[DenseMatrix], float]
    grad_log_kernel: Callable[[DenseMatrix], DenseMatrix]
    mask: DenseMatrix | None = None
    name: str = field(default="target")


def as_target(data: Dataset, mask: DenseMatrix | None = None, backend: Backend | None = None) -> Target:
    """Package the multinomial model as a sampler target.

    With `mask=None` a masked target is still produced (the mask is derived
    from the dataset's shape); pass an explicit mask to share one instance.
    """
    be = _default_backend(backend)
    m = mask if mask is not None else identifiability_mask(data.p, data.k, data.x.precision)
    if m.shape != (data.p, data.k):
        raise ValueError(f"mask shape {m.shape} does not match coefficients ({data.p}, {data.k})")
    return Target(
        shape=(data.p, data.k),
        log_kernel=lambda b: log_kernel(data, b, be),
        grad_log_kernel=lambda b: grad_log_kernel(data, b, m, be),
        mask=m,
        name="multinomial",
    )


def gaussian_target(dim: int, precision: Precision = Precision.F64, backend: Backend | None = None) -> Target:
    """Standard normal in `dim` dimensions; the samplers' validation target.

    log kernel -0.5 * theta . theta, gradient -theta.
    """
    be = _default_backend(backend)

    def logk(theta: DenseMatrix) -> float:
        return -0.5 * be.dot_self(theta.as_column())

    def grad(theta: DenseMatrix) -> DenseMatrix:
        zero = DenseMatrix.zeros(theta.rows, theta.cols, theta.precision)
        return be.axpy(-1.0, theta, zero)

    return Target(shape=(dim, 1), log_kernel=logk, grad_log_kernel=grad, mask=None, name="gaussian")
