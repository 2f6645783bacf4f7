"""Backend conformance suite.

A backend is only selectable once it reproduces the reference backend on a
fixed randomized battery: 100 shape/value cases per operation and precision,
generated from a pinned seed. Agreement is measured per output matrix as

    max|candidate - reference| / max(1, max|reference|)

which reads as the stated relative tolerance for O(1)-and-larger outputs
while not penalizing benign cancellation near zero. Tolerances are 1e-6 for
F32 and 1e-12 for F64. The suite also rejects any backend that mutates its
inputs or produces non-finite values from finite ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..matrix import DenseMatrix, Precision
from .base import Backend, BinaryFn, UnaryFn

SUITE_SEED = 20240311
CASES_PER_OP = 100

TOLERANCE = {Precision.F32: 1e-6, Precision.F64: 1e-12}

OPS = (
    "matmul",
    "matmul_transpose_left",
    "row_softmax",
    "row_log_softmax",
    "elem_unary",
    "elem_binary",
    "axpy",
    "sum_all",
    "dot_self",
)


@dataclass
class OpResult:
    op: str
    precision: Precision
    cases: int
    max_err: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class ConformanceReport:
    backend: str
    results: list[OpResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary(self) -> str:
        lines = [f"conformance report for backend '{self.backend}':"]
        for r in self.results:
            status = "ok" if r.passed else f"FAIL ({len(r.failures)} cases)"
            lines.append(f"  {r.op:<24s} {r.precision.value}  max_err={r.max_err:.3e}  {status}")
        return "\n".join(lines)


def _rand(rng: np.random.Generator, rows: int, cols: int, precision: Precision, scale: float = 2.0) -> DenseMatrix:
    return DenseMatrix((rng.uniform(-scale, scale, (rows, cols))).astype(precision.dtype))


def _mat_err(candidate: DenseMatrix, reference: DenseMatrix) -> float:
    ref = reference.data.astype(np.float64)
    cand = candidate.data.astype(np.float64)
    return float(np.max(np.abs(cand - ref)) / max(1.0, float(np.max(np.abs(ref)))))


def _scalar_err(candidate: float, reference: float) -> float:
    return abs(candidate - reference) / max(1.0, abs(reference))


def _case_inputs(op: str, i: int, rng: np.random.Generator, precision: Precision):
    m, k, n = (int(rng.integers(1, 9)) for _ in range(3))
    if op == "matmul":
        return (_rand(rng, m, k, precision), _rand(rng, k, n, precision))
    if op == "matmul_transpose_left":
        return (_rand(rng, k, m, precision), _rand(rng, k, n, precision))
    if op in ("row_softmax", "row_log_softmax"):
        # Every fourth case stresses the max-subtraction with entries ~1e3.
        scale = 1000.0 if i % 4 == 0 else 3.0
        return (_rand(rng, m, k, precision, scale=scale),)
    if op == "elem_unary":
        fn = list(UnaryFn)[i % len(UnaryFn)]
        a = _rand(rng, m, n, precision)
        if fn is UnaryFn.LOG:
            a = DenseMatrix(np.abs(a.data) + precision.dtype.type(0.5))
        return (a, fn)
    if op == "elem_binary":
        fn = list(BinaryFn)[i % len(BinaryFn)]
        return (_rand(rng, m, n, precision), _rand(rng, m, n, precision), fn)
    if op == "axpy":
        alpha = float(rng.uniform(-2, 2))
        return (alpha, _rand(rng, m, n, precision), _rand(rng, m, n, precision))
    if op == "sum_all":
        return (_rand(rng, m, n, precision),)
    if op == "dot_self":
        shape = (m, 1) if i % 2 == 0 else (1, m)
        return (_rand(rng, *shape, precision),)
    raise ValueError(f"unknown op {op!r}")  # pragma: no cover


def _apply(backend: Backend, op: str, inputs):
    return getattr(backend, op)(*inputs)


def run_conformance(
    backend: Backend,
    reference: Backend | None = None,
    cases_per_op: int = CASES_PER_OP,
    seed: int = SUITE_SEED,
) -> ConformanceReport:
    """Compare `backend` against the reference on the randomized battery."""
    from .reference import ReferenceBackend

    ref = reference if reference is not None else ReferenceBackend()
    results: list[OpResult] = []
    for precision in sorted(backend.supports_precision, key=lambda p: p.value):
        tol = TOLERANCE[precision]
        for op in OPS:
            rng = np.random.default_rng(seed + hash((op, precision.value)) % (2**31))
            max_err = 0.0
            failures: list[str] = []
            for i in range(cases_per_op):
                inputs = _case_inputs(op, i, rng, precision)
                dense_inputs = [x for x in inputs if isinstance(x, DenseMatrix)]
                snapshots = [x.data.copy() for x in dense_inputs]
                expected = _apply(ref, op, inputs)
                got = _apply(backend, op, inputs)
                if isinstance(expected, DenseMatrix):
                    if not np.all(np.isfinite(got.data)):
                        failures.append(f"case {i}: non-finite output")
                        continue
                    err = _mat_err(got, expected)
                else:
                    err = _scalar_err(float(got), float(expected))
                max_err = max(max_err, err)
                if err > tol:
                    failures.append(f"case {i}: err {err:.3e} > tol {tol:.0e}")
                for j, (before, x) in enumerate(zip(snapshots, dense_inputs)):
                    if not np.array_equal(before, x.data):
                        failures.append(f"case {i}: input {j} mutated")
            results.append(OpResult(op, precision, cases_per_op, max_err, failures))
    return ConformanceReport(backend.name, results)
