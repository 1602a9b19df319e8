"""Input validation helpers shared by the estimators and field evaluators."""

from __future__ import annotations

import numpy as np

__all__ = ["check_positions", "check_measurements", "check_wavenumber"]


def check_positions(X, name: str = "X") -> np.ndarray:
    """Coerce to a float array of shape (n, 3) with finite entries.

    A single position given as shape (3,) is promoted to (1, 3).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.shape == (3,):
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return X


def check_measurements(y, n_expected: int, name: str = "y") -> np.ndarray:
    """Coerce to a complex vector of length n_expected with finite entries."""
    y = np.asarray(y, dtype=complex).ravel()
    if y.shape != (n_expected,):
        raise ValueError(f"{name} must have length {n_expected}, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def check_wavenumber(k) -> float:
    k = float(k)
    if not np.isfinite(k) or k <= 0.0:
        raise ValueError(f"wavenumber must be positive and finite, got {k}")
    return k
