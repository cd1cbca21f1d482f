"""Small input-validation helpers used across modules."""

import numbers

import numpy as np

from .exceptions import DomainError


def check_positive(value, name, *, strict=True):
    """Return ``float(value)``, raising :class:`DomainError` if not positive."""
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        kind = "positive" if strict else "non-negative"
        raise DomainError(f"{name} must be {kind}, got {value!r}")
    return value


def check_count(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_unit_vector(vec, name="axis", *, atol=1e-12, normalize=False):
    """Validate a 3-vector of unit length.

    With ``normalize=True`` any non-zero vector is rescaled instead of
    rejected.
    """
    v = np.asarray(vec, dtype=float).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise DomainError(f"{name} must be a finite 3-vector, got {vec!r}")
    norm = np.linalg.norm(v)
    if normalize:
        if norm == 0:
            raise DomainError(f"{name} must be non-zero")
        return v / norm
    if abs(norm - 1.0) > atol:
        raise DomainError(f"{name} must have unit length, |{name}| = {norm!r}")
    return v


def check_vector(vec, name, size=3):
    v = np.asarray(vec, dtype=float).reshape(-1)
    if v.shape != (size,) or not np.all(np.isfinite(v)):
        raise DomainError(f"{name} must be a finite {size}-vector, got {vec!r}")
    return v
