"""Backend registry.

`get_backend(name)` returns a ready-to-use backend instance. Non-reference
backends must pass the full conformance suite the first time they are
requested; the verdict is cached for the process lifetime.
"""

from __future__ import annotations

from typing import Callable

from .base import (
    Backend,
    BackendError,
    BinaryFn,
    DomainError,
    PrecisionMismatchError,
    ShapeMismatchError,
    UnaryFn,
)
from .conformance import ConformanceReport, run_conformance
from .reference import ReferenceBackend

__all__ = [
    "Backend",
    "BackendError",
    "BinaryFn",
    "ConformanceReport",
    "DomainError",
    "PrecisionMismatchError",
    "ReferenceBackend",
    "ShapeMismatchError",
    "UnaryFn",
    "available_backends",
    "get_backend",
    "register_backend",
    "run_conformance",
]


def _make_torch() -> Backend:
    from .torch_backend import TorchBackend

    return TorchBackend()


_FACTORIES: dict[str, Callable[[], Backend]] = {
    "reference": ReferenceBackend,
    "torch": _make_torch,
}

_INSTANCES: dict[str, Backend] = {}
_CONFORMANT: set[str] = {"reference"}  # the reference defines the standard


def register_backend(name: str, factory: Callable[[], Backend]) -> None:
    """Add a backend factory; it will be conformance-gated on first use."""
    _FACTORIES[name] = factory
    _CONFORMANT.discard(name)
    _INSTANCES.pop(name, None)


def available_backends() -> list[str]:
    """Backend names that can actually be constructed in this environment."""
    names = []
    for name, factory in _FACTORIES.items():
        if name in _INSTANCES:
            names.append(name)
            continue
        try:
            _INSTANCES[name] = factory()
            names.append(name)
        except ImportError:
            continue
    return names


def get_backend(name: str = "reference") -> Backend:
    """Return a conformance-checked backend instance by name."""
    if name not in _FACTORIES:
        raise KeyError(f"unknown backend '{name}'; known: {sorted(_FACTORIES)}")
    if name not in _INSTANCES:
        _INSTANCES[name] = _FACTORIES[name]()
    backend = _INSTANCES[name]
    if name not in _CONFORMANT:
        report = run_conformance(backend)
        if not report.passed:
            raise BackendError(
                f"backend '{name}' failed conformance and is not selectable:\n{report.summary()}"
            )
        _CONFORMANT.add(name)
    return backend
