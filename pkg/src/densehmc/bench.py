"""Timing harness for the gradient and leapfrog hot paths.

Sweeps (N, K, p) over a grid of problem sizes, times a single gradient
evaluation and a single leapfrog update per backend on synthetic data, and
emits the averaged results as CSV. Sweeps are resumable: records already in
the output file are loaded and their grid points skipped, and the file is
atomically rewritten after every completed point, so an interrupted run
loses at most the point in flight and a rerun never duplicates rows.

The masked variant enforces the identifiability constraint exactly as the
sampler does (mask multiplications included in the timed region); the
unmasked variant times the raw expressions with no mask anywhere, which is
the cheapest possible evaluation and differs observably in the gradient's
last column.
"""

from __future__ import annotations

import itertools
import math
import os
import statistics
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .backends import Backend, get_backend
from .matrix import DenseMatrix, Precision
from .model import Dataset, Target, grad_log_kernel, identifiability_mask, log_kernel, one_hot
from .sampler import leapfrog

DEFAULT_REPETITIONS = 5
DEFAULT_MEM_BUDGET_MB = 4096.0
COEF_SD = math.sqrt(1e-3)  # synthetic-data scale used for all timing points

OP_GRADIENT = "gradient"
OP_LEAPFROG = "leapfrog"


class Variant(str, Enum):
    MASKED = "masked"
    UNMASKED = "unmasked"


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian sweep over sample sizes, class counts and dimensions."""

    n_values: tuple[int, ...]
    k_values: tuple[int, ...]
    p_values: tuple[int, ...]
    repetitions: int = DEFAULT_REPETITIONS
    variant: Variant = Variant.MASKED

    def validate(self) -> None:
        for name, values in (("n_values", self.n_values), ("k_values", self.k_values), ("p_values", self.p_values)):
            if not values or any(v < 1 for v in values):
                raise ValueError(f"{name}: all values must be positive, got {values}")
        if any(k < 2 for k in self.k_values):
            raise ValueError(f"k_values: classes must be at least 2, got {self.k_values}")
        if self.repetitions < 1:
            raise ValueError("repetitions: must be at least 1")

    def points(self):
        return itertools.product(self.n_values, self.k_values, self.p_values)

    def __len__(self) -> int:
        return len(self.n_values) * len(self.k_values) * len(self.p_values)


def default_grid(variant: Variant = Variant.MASKED, repetitions: int = DEFAULT_REPETITIONS) -> SweepGrid:
    """The full 4 x 7 x 8 = 224-point sweep.

    The sample sizes are 100, 1000, 5000 and 10000: four distinct values,
    consistent with the 224-combination total.
    """
    return SweepGrid(
        n_values=(100, 1000, 5000, 10000),
        k_values=(2, 3, 4, 5, 10, 15, 20),
        p_values=(10, 50, 100, 500, 1000, 5000, 10000, 20000),
        repetitions=repetitions,
        variant=variant,
    )


@dataclass
class TimingRecord:
    """One timed (or skipped) grid point for one backend and operation."""

    n: int
    k: int
    p: int
    backend: str
    op: str
    variant: str
    precision: str
    mean_s: float | None
    rep_s: tuple[float, ...] = ()
    skip_reason: str = ""

    @property
    def key(self) -> tuple:
        return (self.n, self.k, self.p, self.backend, self.op, self.variant, self.precision)

    @property
    def skipped(self) -> bool:
        return bool(self.skip_reason)


def estimate_point_bytes(n: int, k: int, p: int, precision: Precision) -> int:
    """Rough live-set size for one grid point: data, coefficients, and the
    handful of intermediates a gradient or leapfrog evaluation holds."""
    elems = n * p + 4 * n * k + 6 * p * k
    return elems * precision.dtype.itemsize


def _synth_point(n: int, k: int, p: int, precision: Precision, seed: int):
    """Synthetic (Dataset, B) for a timing point, drawn natively at the
    requested precision to halve transient memory at the big sizes."""
    rng = np.random.default_rng(seed)
    dtype = precision.dtype
    x = rng.standard_normal((n, p), dtype=dtype) * dtype.type(COEF_SD)
    b = rng.standard_normal((p, k), dtype=dtype) * dtype.type(COEF_SD)
    logits = x @ b
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    labels = (rng.uniform(size=n)[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    labels = np.minimum(labels, k - 1)
    return Dataset(DenseMatrix(x), one_hot(labels, k, precision)), DenseMatrix(b)


def _prepare(n, k, p, variant: Variant, precision: Precision, seed: int, backend: Backend):
    data, b = _synth_point(n, k, p, precision, seed)
    if variant is Variant.MASKED:
        mask = identifiability_mask(p, k, precision)
        bd = b.data.copy()
        bd[:, -1] = 0.0
        b = DenseMatrix(bd)
    else:
        mask = None
    target = Target(
        shape=(p, k),
        log_kernel=lambda coef: log_kernel(data, coef, backend),
        grad_log_kernel=lambda coef: grad_log_kernel(data, coef, mask, backend),
        mask=mask,
    )
    return data, b, mask, target


def _record(n, k, p, backend_name, op, variant, precision, rep_s) -> TimingRecord:
    return TimingRecord(
        n=n,
        k=k,
        p=p,
        backend=backend_name,
        op=op,
        variant=variant.value,
        precision=precision.value,
        mean_s=float(statistics.fmean(rep_s)),
        rep_s=tuple(rep_s),
    )


def _skip(n, k, p, backend_name, op, variant, precision, reason) -> TimingRecord:
    return TimingRecord(
        n=n, k=k, p=p, backend=backend_name, op=op,
        variant=variant.value, precision=precision.value,
        mean_s=None, rep_s=(), skip_reason=reason,
    )


def _budget_reason(n, k, p, precision, mem_budget_bytes) -> str:
    need = estimate_point_bytes(n, k, p, precision)
    if mem_budget_bytes is not None and need > mem_budget_bytes:
        return f"estimated {need / 2**20:.0f} MiB exceeds budget {mem_budget_bytes / 2**20:.0f} MiB"
    return ""


def time_gradient(
    n: int,
    k: int,
    p: int,
    backend: Backend,
    reps: int = DEFAULT_REPETITIONS,
    variant: Variant = Variant.MASKED,
    precision: Precision = Precision.F32,
    seed: int = 0,
    mem_budget_bytes: float | None = None,
) -> TimingRecord:
    """Wall-clock a single gradient evaluation `reps` times.

    Data generation is untimed and one warm-up evaluation is discarded
    before the timed repetitions.
    """
    reason = _budget_reason(n, k, p, precision, mem_budget_bytes)
    if reason:
        return _skip(n, k, p, backend.name, OP_GRADIENT, variant, precision, reason)
    try:
        data, b, mask, _ = _prepare(n, k, p, variant, precision, seed, backend)
        grad_log_kernel(data, b, mask, backend)  # warm-up
        rep_s = []
        for _ in range(reps):
            t0 = time.perf_counter()
            grad_log_kernel(data, b, mask, backend)
            rep_s.append(time.perf_counter() - t0)
    except MemoryError:
        return _skip(n, k, p, backend.name, OP_GRADIENT, variant, precision, "allocation failure")
    return _record(n, k, p, backend.name, OP_GRADIENT, variant, precision, rep_s)


def time_leapfrog(
    n: int,
    k: int,
    p: int,
    backend: Backend,
    reps: int = DEFAULT_REPETITIONS,
    variant: Variant = Variant.MASKED,
    precision: Precision = Precision.F32,
    seed: int = 0,
    mem_budget_bytes: float | None = None,
    epsilon: float = 1e-3,
) -> TimingRecord:
    """Wall-clock one full leapfrog update (two gradient evaluations plus
    the position and momentum steps); same warm-up and averaging rules as
    :func:`time_gradient`."""
    reason = _budget_reason(n, k, p, precision, mem_budget_bytes)
    if reason:
        return _skip(n, k, p, backend.name, OP_LEAPFROG, variant, precision, reason)
    try:
        _, b, _, target = _prepare(n, k, p, variant, precision, seed, backend)
        rng = np.random.default_rng(seed + 1)
        eta = DenseMatrix(rng.standard_normal((p, k)).astype(precision.dtype))
        leapfrog(b, eta, epsilon, 1, target, backend)  # warm-up
        rep_s = []
        for _ in range(reps):
            t0 = time.perf_counter()
            leapfrog(b, eta, epsilon, 1, target, backend)
            rep_s.append(time.perf_counter() - t0)
    except MemoryError:
        return _skip(n, k, p, backend.name, OP_LEAPFROG, variant, precision, "allocation failure")
    return _record(n, k, p, backend.name, OP_LEAPFROG, variant, precision, rep_s)


# -- CSV report ---------------------------------------------------------

BASE_COLUMNS = ("n", "k", "p", "backend", "op", "variant", "precision", "mean_s")


def _ratio_map(records: list[TimingRecord]) -> dict[tuple, float]:
    """speedup = reference mean / backend mean, per shared grid point."""
    ref_means = {
        (r.n, r.k, r.p, r.op, r.variant, r.precision): r.mean_s
        for r in records
        if r.backend == "reference" and r.mean_s is not None
    }
    ratios = {}
    for r in records:
        if r.mean_s is None:
            continue
        ref = ref_means.get((r.n, r.k, r.p, r.op, r.variant, r.precision))
        if ref is not None:
            ratios[r.key] = ref / r.mean_s
    return ratios


def emit_report(records: list[TimingRecord]) -> str:
    """Render records as CSV with a stable column order.

    Columns: the base fields, one rep_<i>_s column per repetition, the
    speedup ratio (reference time / this backend's time, present when the
    reference timed the same point) and the skip reason.
    """
    if not records:
        raise ValueError("no records to report")
    max_reps = max((len(r.rep_s) for r in records), default=0)
    rep_cols = [f"rep_{i}_s" for i in range(max_reps)]
    header = list(BASE_COLUMNS) + rep_cols + ["speedup_ref_over_this", "skip_reason"]
    ratios = _ratio_map(records)
    lines = [",".join(header)]
    for r in records:
        row = [
            str(r.n), str(r.k), str(r.p), r.backend, r.op, r.variant, r.precision,
            repr(r.mean_s) if r.mean_s is not None else "",
        ]
        row += [repr(r.rep_s[i]) if i < len(r.rep_s) else "" for i in range(max_reps)]
        ratio = ratios.get(r.key)
        row.append(repr(ratio) if ratio is not None else "")
        row.append(r.skip_reason)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_report(records: list[TimingRecord], path) -> None:
    """Atomically replace `path` with the rendered report."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(emit_report(records))
    os.replace(tmp, path)


def load_report(path) -> list[TimingRecord]:
    """Parse a report written by :func:`write_report`."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        return []
    header = lines[0].split(",")
    rep_cols = [i for i, name in enumerate(header) if name.startswith("rep_")]
    col = {name: i for i, name in enumerate(header)}
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        mean_raw = parts[col["mean_s"]]
        records.append(
            TimingRecord(
                n=int(parts[col["n"]]),
                k=int(parts[col["k"]]),
                p=int(parts[col["p"]]),
                backend=parts[col["backend"]],
                op=parts[col["op"]],
                variant=parts[col["variant"]],
                precision=parts[col["precision"]],
                mean_s=float(mean_raw) if mean_raw else None,
                rep_s=tuple(float(parts[i]) for i in rep_cols if parts[i]),
                skip_reason=parts[col["skip_reason"]],
            )
        )
    return records


def summarize(records: list[TimingRecord]) -> str:
    """Aligned per-backend/op summary of a record set."""
    lines = [f"{'backend':<12} {'op':<10} {'variant':<10} {'points':>6} {'skips':>5} "
             f"{'min mean_s':>12} {'max mean_s':>12}"]
    groups: dict[tuple, list[TimingRecord]] = {}
    for r in records:
        groups.setdefault((r.backend, r.op, r.variant), []).append(r)
    for (backend, op, variant), recs in sorted(groups.items()):
        timed = [r.mean_s for r in recs if r.mean_s is not None]
        skips = sum(1 for r in recs if r.skipped)
        lo = f"{min(timed):.3e}" if timed else "-"
        hi = f"{max(timed):.3e}" if timed else "-"
        lines.append(f"{backend:<12} {op:<10} {variant:<10} {len(recs):>6} {skips:>5} {lo:>12} {hi:>12}")
    ratios = [v for v in _ratio_map(records).values()]
    multi = {r.backend for r in records} - {"reference"}
    if multi and ratios:
        lines.append(f"speedup (reference/other) over {len(ratios)} shared points: "
                     f"median {statistics.median(ratios):.2f}x")
    return "\n".join(lines)


def run_sweep(
    grid: SweepGrid,
    backends: list[str],
    out_path,
    precision: Precision = Precision.F32,
    mem_budget_mb: float = DEFAULT_MEM_BUDGET_MB,
    seed: int = 0,
    progress=None,
) -> list[TimingRecord]:
    """Time every grid point for every backend and op, resumably.

    Existing records at `out_path` are honored (their grid points are not
    re-run) and the report is rewritten after each new record.
    """
    grid.validate()
    out_path = Path(out_path)
    records = load_report(out_path) if out_path.exists() else []
    done = {r.key for r in records}
    budget = mem_budget_mb * 2**20
    timers = {OP_GRADIENT: time_gradient, OP_LEAPFROG: time_leapfrog}
    for n, k, p in grid.points():
        for backend_name in backends:
            backend = get_backend(backend_name)
            for op, timer in timers.items():
                key = (n, k, p, backend_name, op, grid.variant.value, precision.value)
                if key in done:
                    continue
                rec = timer(
                    n, k, p, backend,
                    reps=grid.repetitions,
                    variant=grid.variant,
                    precision=precision,
                    seed=seed,
                    mem_budget_bytes=budget,
                )
                records.append(rec)
                done.add(key)
                write_report(records, out_path)
                if progress is not None:
                    progress(rec)
    return records
