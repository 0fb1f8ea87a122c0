"""Input validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

from .errors import DataError, NonFiniteValuesError


def as_f64_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-d float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"{name} must be 2-d, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NonFiniteValuesError(f"{name} contains non-finite values")
    return X


def as_f64_vector(x, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"{name} must be 1-d, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteValuesError(f"{name} contains non-finite values")
    return x


def check_probabilities(p, name: str = "probs") -> np.ndarray:
    """Coerce to float64 and verify every value lies in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    if not np.isfinite(p).all():
        raise NonFiniteValuesError(f"{name} contains non-finite values")
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise DataError(f"{name} must lie in [0, 1]")
    return p


def check_binary(m, name: str = "mask") -> np.ndarray:
    """Verify an array contains only {0, 1}; returns it as uint8."""
    m = np.asarray(m)
    vals = np.unique(m)
    if not np.isin(vals, (0, 1)).all():
        raise DataError(f"{name} must contain only 0/1, found values {vals[:5]}")
    return m.astype(np.uint8)


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise DataError(f"{what} shapes differ: {a.shape} vs {b.shape}")
