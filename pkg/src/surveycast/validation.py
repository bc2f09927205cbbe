"""Small input-validation helpers shared by the estimator-style classes."""

import numpy as np

from .errors import ConfigError, UndefinedMetricError


def as_float_array(values, name="values", allow_empty=False):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not allow_empty and arr.size == 0:
        raise ConfigError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains NaN or infinite entries")
    return arr


def as_int_array(values, name="values"):
    arr = np.asarray(values)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=np.float64)
        if not np.all(rounded == np.floor(rounded)):
            raise ConfigError(f"{name} must be integer valued")
        arr = rounded.astype(np.int64)
    return arr.astype(np.int64, copy=False)


def check_binary_labels(labels, name="labels"):
    arr = as_int_array(labels, name)
    bad = ~np.isin(arr, (0, 1))
    if np.any(bad):
        raise ConfigError(f"{name} must be 0/1; found {arr[bad][:5].tolist()}")
    return arr


def check_both_classes(labels, context="AUC"):
    pos = int(np.sum(labels == 1))
    neg = int(np.sum(labels == 0))
    if pos == 0 or neg == 0:
        raise UndefinedMetricError(
            f"{context} undefined: need both classes, got {pos} positive / {neg} negative"
        )
    return pos, neg


def check_positive(value, name):
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def check_fraction(value, name, inclusive_low=True, inclusive_high=False):
    low_ok = value >= 0 if inclusive_low else value > 0
    high_ok = value <= 1 if inclusive_high else value < 1
    if not (low_ok and high_ok):
        raise ConfigError(f"{name} must lie in the unit interval, got {value!r}")
    return value
