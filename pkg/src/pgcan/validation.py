"""Input-validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, OutOfDomainError

DOMAIN_TOL = 1e-9  # slack for points meant to sit exactly on the boundary


def check_points(X, n_dims=None, bounds=None, name="X"):
    """Validates a query-point array: 2D, finite, correct width, in-domain.

    Returns a float64 copy. Points may sit on the closed boundary; anything
    beyond ``DOMAIN_TOL`` (relative to the axis span) raises.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ConfigurationError(f"{name} must be a 2D array, got shape {X.shape}")
    if n_dims is not None and X.shape[1] != n_dims:
        raise ConfigurationError(
            f"{name} has {X.shape[1]} columns, expected {n_dims}")
    if not np.isfinite(X).all():
        raise ConfigurationError(f"{name} contains non-finite values")
    if bounds is not None:
        for axis, (lo, hi) in enumerate(bounds):
            slack = DOMAIN_TOL * (hi - lo)
            col = X[:, axis]
            if (col < lo - slack).any() or (col > hi + slack).any():
                raise OutOfDomainError(
                    f"{name}[:, {axis}] outside [{lo}, {hi}]")
    return X


def check_positive(value, name):
    if value <= 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value
