"""Hamiltonian Monte Carlo driver plus a random-walk baseline.

The HMC chain alternates momentum refresh, a leapfrog trajectory and a
Metropolis test. During burn-in the acceptance probability is tempered to
alpha^(1/T) under a geometric annealing schedule T <- max(1, r*T), which
helps the chain escape a poor initialization; sampling iterations use plain
alpha so the stationary distribution is exactly the target. Constrained
coordinates (the target's mask) are zeroed in the momentum and after every
leapfrog sub-step, so retained samples satisfy the constraint exactly.

Kinetic energy is 0.5 * eta . eta. Together with the unit position step
theta <- theta + epsilon * eta this is the Hamiltonian the leapfrog scheme
integrates; dropping the 0.5 breaks detailed balance, which the validation
command demonstrates via its negative-control hook.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .backends import Backend, BinaryFn, get_backend
from .matrix import DenseMatrix, Precision
from .model import Target


class Phase(str, Enum):
    BURNIN = "burnin"
    SAMPLING = "sampling"


class ConfigError(ValueError):
    """Invalid sampler configuration; `field` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class TrajectoryDivergence(RuntimeError):
    """A leapfrog trajectory produced a non-finite gradient."""

    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"non-finite gradient at leapfrog step {step_index}")


@dataclass
class HmcConfig:
    """Tuning knobs for one HMC run.

    Separate step sizes for the burn-in and sampling phases; `anneal_t0`
    and `anneal_r` control the burn-in tempering schedule.
    """

    epsilon_burnin: float
    epsilon_sampling: float
    leapfrog_steps: int
    burnin_iters: int
    sample_iters: int
    anneal_t0: float = 1.0
    anneal_r: float = 0.9
    seed: int = 0
    precision: Precision = Precision.F64

    def validate(self) -> None:
        if not self.epsilon_burnin > 0:
            raise ConfigError("epsilon_burnin", "must be positive")
        if not self.epsilon_sampling > 0:
            raise ConfigError("epsilon_sampling", "must be positive")
        if self.leapfrog_steps < 1:
            raise ConfigError("leapfrog_steps", "must be at least 1")
        if self.burnin_iters < 0:
            raise ConfigError("burnin_iters", "must be nonnegative")
        if self.sample_iters < 1:
            raise ConfigError("sample_iters", "must be at least 1")
        if not self.anneal_t0 >= 1.0:
            raise ConfigError("anneal_t0", "must be >= 1")
        if not (0.0 < self.anneal_r < 1.0):
            raise ConfigError("anneal_r", "must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be nonnegative")


@dataclass
class ChainState:
    """Mutable state of a single chain."""

    theta: DenseMatrix
    log_kernel_current: float
    rng: np.random.Generator
    iteration: int = 0
    temperature: float = 1.0
    accepts: int = 0


@dataclass
class IterationRecord:
    """Per-iteration diagnostics."""

    phase: str
    iteration: int
    log_kernel: float
    accepted: bool
    energy_error: float
    temperature: float
    divergent: bool = False
    chain: int = 0


class SampleStore:
    """Retained posterior draws plus the full per-iteration record stream."""

    def __init__(self, shape: tuple[int, int]):
        self.shape = shape
        self.positions: list[DenseMatrix] = []
        self.records: list[IterationRecord] = []
        self.wall_clock: dict[str, float] = {}

    def __len__(self) -> int:
        return len(self.positions)

    def acceptance_rate(self, phase: Optional[Phase] = None) -> float:
        recs = [r for r in self.records if phase is None or r.phase == phase.value]
        if not recs:
            return 0.0
        return sum(r.accepted for r in recs) / len(recs)

    def log_kernel_trace(self, phase: Optional[Phase] = None) -> list[float]:
        return [r.log_kernel for r in self.records if phase is None or r.phase == phase.value]

    def posterior_mean(self) -> DenseMatrix:
        if not self.positions:
            raise ValueError("no retained samples")
        stack = np.stack([p.data for p in self.positions])
        return DenseMatrix(stack.mean(axis=0))

    def as_matrix(self) -> DenseMatrix:
        """Draws as one [n_samples, rows*cols] matrix, row-major per draw."""
        if not self.positions:
            raise ValueError("no retained samples")
        return DenseMatrix(np.stack([p.data.ravel() for p in self.positions]))

    @classmethod
    def from_matrix(cls, m: DenseMatrix, shape: tuple[int, int]) -> "SampleStore":
        rows, cols = shape
        if m.cols != rows * cols:
            raise ValueError(f"sample matrix has {m.cols} columns, expected {rows * cols}")
        store = cls(shape)
        store.positions = [DenseMatrix(row.reshape(rows, cols)) for row in m.data]
        return store

    @classmethod
    def merge(cls, stores: list["SampleStore"]) -> "SampleStore":
        """Concatenate chains; records keep their chain labels."""
        if not stores:
            raise ValueError("nothing to merge")
        merged = cls(stores[0].shape)
        for store in stores:
            if store.shape != merged.shape:
                raise ValueError("cannot merge stores with different position shapes")
            merged.positions.extend(store.positions)
            merged.records.extend(store.records)
        for key in stores[0].wall_clock:
            merged.wall_clock[key] = sum(s.wall_clock.get(key, 0.0) for s in stores)
        return merged


def _apply_mask(m: DenseMatrix, mask: Optional[DenseMatrix], backend: Backend) -> DenseMatrix:
    if mask is None:
        return m
    return backend.elem_binary(m, mask, BinaryFn.MUL)


def refresh_momentum(
    shape: tuple[int, int],
    rng: np.random.Generator,
    precision: Precision = Precision.F64,
    mask: Optional[DenseMatrix] = None,
    backend: Backend | None = None,
) -> DenseMatrix:
    """Fresh standard-normal momentum, zeroed on constrained coordinates."""
    be = backend if backend is not None else get_backend("reference")
    eta = DenseMatrix(rng.standard_normal(shape).astype(precision.dtype))
    return _apply_mask(eta, mask, be)


def leapfrog(
    theta: DenseMatrix,
    eta: DenseMatrix,
    epsilon: float,
    n_steps: int,
    target: Target,
    backend: Backend | None = None,
) -> tuple[DenseMatrix, DenseMatrix]:
    """Integrate Hamiltonian dynamics for `n_steps` leapfrog steps.

    Adjacent momentum half-steps are fused, which is algebraically identical
    to n_steps literal (half, full, half) cycles. The constraint mask is
    re-applied to position and momentum after every sub-step. Raises
    TrajectoryDivergence if a gradient goes non-finite.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon", "must be positive")
    if n_steps < 1:
        raise ConfigError("leapfrog_steps", "must be at least 1")
    be = backend if backend is not None else get_backend("reference")
    mask = target.mask

    def checked_grad(position: DenseMatrix, step: int) -> DenseMatrix:
        g = target.grad_log_kernel(position)
        if not np.all(np.isfinite(g.data)):
            raise TrajectoryDivergence(step)
        return g

    half = 0.5 * epsilon
    eta = be.axpy(half, checked_grad(theta, 0), eta)
    eta = _apply_mask(eta, mask, be)
    for step in range(1, n_steps + 1):
        theta = be.axpy(epsilon, eta, theta)
        theta = _apply_mask(theta, mask, be)
        grad = checked_grad(theta, step)
        eta = be.axpy(epsilon if step < n_steps else half, grad, eta)
        eta = _apply_mask(eta, mask, be)
    return theta, eta


def log_accept_ratio(
    logk_new: float,
    logk_old: float,
    eta_new: DenseMatrix,
    eta_old: DenseMatrix,
    backend: Backend | None = None,
    kinetic_factor: float = 0.5,
) -> float:
    """Log Metropolis ratio: (logK' - kf*|eta'|^2) - (logK - kf*|eta|^2)."""
    be = backend if backend is not None else get_backend("reference")
    h_new = logk_new - kinetic_factor * be.dot_self(eta_new.as_column())
    h_old = logk_old - kinetic_factor * be.dot_self(eta_old.as_column())
    return h_new - h_old


def accept_prob(
    logk_new: float,
    logk_old: float,
    eta_new: DenseMatrix,
    eta_old: DenseMatrix,
    backend: Backend | None = None,
    kinetic_factor: float = 0.5,
) -> float:
    """Metropolis acceptance probability; 0 for non-finite proposals."""
    if not math.isfinite(logk_new):
        return 0.0
    ratio = log_accept_ratio(logk_new, logk_old, eta_new, eta_old, backend, kinetic_factor)
    return min(1.0, math.exp(min(0.0, ratio)))


def anneal_temp(prev_t: float, r: float) -> float:
    """One step of the burn-in temperature schedule: max(1, r * T)."""
    return max(1.0, r * prev_t)


def anneal_steps_to_floor(t0: float, r: float) -> int:
    """Number of schedule steps until the temperature first equals 1."""
    if t0 <= 1.0:
        return 0
    return math.ceil(math.log(t0) / -math.log(r))


def hmc_iteration(
    state: ChainState,
    config: HmcConfig,
    target: Target,
    phase: Phase,
    backend: Backend | None = None,
    kinetic_factor: float = 0.5,
    chain_id: int = 0,
) -> tuple[ChainState, IterationRecord]:
    """Advance the chain by one HMC iteration.

    Burn-in iterations accept with alpha^(1/T) and advance the annealing
    temperature once per iteration (accepted or not); sampling iterations
    use plain alpha at T = 1. A divergent trajectory counts as a rejection.
    """
    be = backend if backend is not None else get_backend("reference")
    epsilon = config.epsilon_burnin if phase is Phase.BURNIN else config.epsilon_sampling
    temperature = state.temperature if phase is Phase.BURNIN else 1.0

    eta = refresh_momentum(target.shape, state.rng, state.theta.precision, target.mask, be)
    divergent = False
    accepted = False
    energy_error = math.inf
    try:
        theta_new, eta_new = leapfrog(state.theta, eta, epsilon, config.leapfrog_steps, target, be)
        logk_new = target.log_kernel(theta_new)
        ratio = log_accept_ratio(logk_new, state.log_kernel_current, eta_new, eta, be, kinetic_factor)
        if math.isfinite(logk_new):
            energy_error = -ratio
            alpha = min(1.0, math.exp(min(0.0, ratio)))
        else:
            alpha = 0.0
        threshold = alpha ** (1.0 / temperature) if phase is Phase.BURNIN else alpha
        if state.rng.uniform() < threshold:
            state.theta = theta_new
            state.log_kernel_current = logk_new
            state.accepts += 1
            accepted = True
    except TrajectoryDivergence:
        divergent = True

    record = IterationRecord(
        phase=phase.value,
        iteration=state.iteration,
        log_kernel=state.log_kernel_current,
        accepted=accepted,
        energy_error=energy_error,
        temperature=temperature,
        divergent=divergent,
        chain=chain_id,
    )
    if phase is Phase.BURNIN:
        state.temperature = anneal_temp(state.temperature, config.anneal_r)
    state.iteration += 1
    return state, record


def run_chain(
    config: HmcConfig,
    target: Target,
    init: DenseMatrix | None = None,
    backend: Backend | None = None,
    kinetic_factor: float = 0.5,
    thin: int = 1,
    chain_id: int = 0,
) -> SampleStore:
    """Run burn-in then sampling; returns retained draws and diagnostics.

    Fully reproducible for a given (seed, backend, precision). Divergences
    are recorded as rejections, never raised.
    """
    config.validate()
    if thin < 1:
        raise ConfigError("thin", "must be at least 1")
    be = backend if backend is not None else get_backend("reference")
    theta = init if init is not None else DenseMatrix.zeros(*target.shape, config.precision)
    if theta.shape != target.shape:
        raise ConfigError("init", f"shape {theta.shape} does not match target {target.shape}")
    if target.mask is not None and np.any(theta.data[target.mask.data == 0.0] != 0.0):
        raise ConfigError("init", "nonzero entries on constrained coordinates")

    state = ChainState(
        theta=theta,
        log_kernel_current=target.log_kernel(theta),
        rng=np.random.default_rng(config.seed),
        temperature=config.anneal_t0,
    )
    store = SampleStore(target.shape)

    start = time.perf_counter()
    for _ in range(config.burnin_iters):
        state, record = hmc_iteration(state, config, target, Phase.BURNIN, be, kinetic_factor, chain_id)
        store.records.append(record)
    store.wall_clock["burnin_s"] = time.perf_counter() - start

    state.temperature = 1.0
    start = time.perf_counter()
    for i in range(config.sample_iters * thin):
        state, record = hmc_iteration(state, config, target, Phase.SAMPLING, be, kinetic_factor, chain_id)
        store.records.append(record)
        if (i + 1) % thin == 0:
            store.positions.append(state.theta)
    store.wall_clock["sampling_s"] = time.perf_counter() - start
    return store


def rwmh_iteration(
    state: ChainState,
    proposal_scale: float,
    target: Target,
    backend: Backend | None = None,
    chain_id: int = 0,
) -> tuple[ChainState, IterationRecord]:
    """One random-walk Metropolis update with a symmetric Gaussian proposal.

    The symmetric proposal density cancels in the Metropolis ratio, so the
    acceptance probability reduces to min(1, exp(logK' - logK)).
    """
    if proposal_scale < 0:
        raise ConfigError("proposal_scale", "must be nonnegative")
    be = backend if backend is not None else get_backend("reference")
    step = refresh_momentum(target.shape, state.rng, state.theta.precision, target.mask, be)
    proposal = be.axpy(proposal_scale, step, state.theta)
    logk_new = target.log_kernel(proposal)
    alpha = 0.0
    if math.isfinite(logk_new):
        alpha = min(1.0, math.exp(min(0.0, logk_new - state.log_kernel_current)))
    accepted = False
    if state.rng.uniform() < alpha:
        state.theta = proposal
        state.log_kernel_current = logk_new
        state.accepts += 1
        accepted = True
    record = IterationRecord(
        phase="rwmh",
        iteration=state.iteration,
        log_kernel=state.log_kernel_current,
        accepted=accepted,
        energy_error=math.nan,
        temperature=1.0,
        chain=chain_id,
    )
    state.iteration += 1
    return state, record


def run_rwmh(
    target: Target,
    iterations: int,
    proposal_scale: float,
    seed: int = 0,
    precision: Precision = Precision.F64,
    burnin: int = 0,
    init: DenseMatrix | None = None,
    backend: Backend | None = None,
    chain_id: int = 0,
) -> SampleStore:
    """Random-walk Metropolis baseline; retains every post-burn-in state."""
    if iterations < 1:
        raise ConfigError("iterations", "must be at least 1")
    be = backend if backend is not None else get_backend("reference")
    theta = init if init is not None else DenseMatrix.zeros(*target.shape, precision)
    state = ChainState(
        theta=theta,
        log_kernel_current=target.log_kernel(theta),
        rng=np.random.default_rng(seed),
    )
    store = SampleStore(target.shape)
    start = time.perf_counter()
    for i in range(burnin + iterations):
        state, record = rwmh_iteration(state, proposal_scale, target, be, chain_id)
        store.records.append(record)
        if i >= burnin:
            store.positions.append(state.theta)
    store.wall_clock["rwmh_s"] = time.perf_counter() - start
    return store
