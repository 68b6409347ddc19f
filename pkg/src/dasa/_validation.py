"""Input validation helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np

from dasa.exceptions import ConfigurationError, InvalidParameterError


def check_finite(name: str, value) -> float:
    """Return ``value`` as float, raising if it is not a finite real."""
    try:
        x = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(x):
        raise InvalidParameterError(f"{name} must be finite, got {x}")
    return x


def check_positive(name: str, value) -> float:
    x = check_finite(name, value)
    if x <= 0:
        raise ConfigurationError(f"{name} must be > 0, got {x}")
    return x


def as_square_matrix(entries, dims=(2, 3)) -> np.ndarray:
    """Coerce to a complex ``(n, n)`` array with ``n`` in ``dims``."""
    m = np.array(getattr(entries, "entries", entries), dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in dims:
        raise InvalidParameterError(f"expected a square matrix of size {dims}, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidParameterError("matrix entries must be finite")
    return m


def as_state(psi, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-d complex state vector with finite, nonzero norm."""
    v = np.array(psi, dtype=complex).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise InvalidParameterError(f"state has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError("state amplitudes must be finite")
    if not np.any(v):
        raise InvalidParameterError("state must have nonzero norm")
    return v
