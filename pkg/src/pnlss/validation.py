"""Input validation helpers used across the estimation pipeline."""

import numbers

import numpy as np

from .exceptions import ConfigurationError


def check_positive(value, name):
    """Require a finite, strictly positive real number."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if not isinstance(value, numbers.Integral) or value <= 0:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_nonnegative_int(value, name):
    if not isinstance(value, numbers.Integral) or value < 0:
        raise ConfigurationError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_in_unit_interval(value, name):
    """Require a real number in (0, 1]."""
    if not isinstance(value, numbers.Real) or not (0 < value <= 1):
        raise ConfigurationError(f"{name} must lie in (0, 1], got {value!r}")
    return float(value)


def as_float_array(x, name, ndim=None):
    """Convert to a float ndarray, requiring finite entries.

    ``ndim`` fixes the required dimensionality; 1-D input is promoted to a
    column when ``ndim=2`` so single-channel signals can be passed as plain
    vectors.
    """
    arr = np.asarray(x, dtype=float)
    if ndim is not None:
        if arr.ndim == ndim - 1 and ndim == 2:
            arr = arr[:, None]
        if arr.ndim != ndim:
            raise ConfigurationError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite values")
    return arr


def check_matrix(x, name, shape=None):
    """Require a finite 2-D float array, optionally of an exact shape."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ConfigurationError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite values")
    return arr


def check_index_array(x, name, upper=None):
    """Require a 1-D array of non-negative integers, optionally bounded."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ConfigurationError(f"{name} must be 1-D")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.asarray(arr, dtype=int)):
            raise ConfigurationError(f"{name} must contain integers")
    arr = arr.astype(int)
    if arr.size and (arr.min() < 0 or (upper is not None and arr.max() >= upper)):
        raise ConfigurationError(f"{name} entries must lie in [0, {upper})")
    return arr
