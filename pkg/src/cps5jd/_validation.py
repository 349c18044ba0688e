"""Input validation shared by the estimators."""
from __future__ import annotations

import numbers

import numpy as np


def check_tensor(T, order, name="T"):
    """Return ``T`` as a finite complex128 array of the given order."""
    arr = np.asarray(T)
    if arr.dtype == object:
        raise TypeError("%s must be numeric, got dtype=object" % name)
    if arr.ndim != order:
        raise ValueError("%s must be a %d-way array, got ndim=%d" % (name, order, arr.ndim))
    if arr.size == 0:
        raise ValueError("%s is empty (shape %s)" % (name, arr.shape))
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains NaN or inf" % name)
    return arr


def check_tensor5(T, name="T"):
    """Validate a fifth-order tensor of shape ``(I, J, I, J, K)``."""
    arr = check_tensor(T, 5, name)
    I, J, I2, J2, _ = arr.shape
    if I != I2 or J != J2:
        raise ValueError(
            "%s must have shape (I, J, I, J, K), got %s" % (name, arr.shape)
        )
    return arr


def check_rank(rank, upper=None, name="n_components"):
    if not isinstance(rank, numbers.Integral) or isinstance(rank, bool):
        raise TypeError("%s must be an int, got %r" % (name, rank))
    if rank < 1:
        raise ValueError("%s must be >= 1, got %d" % (name, rank))
    if upper is not None and rank > upper:
        raise ValueError("%s=%d exceeds the admissible maximum %d" % (name, rank, upper))
    return int(rank)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError("%s must be a positive number, got %r" % (name, value))
    return float(value)
