"""
Small array helpers used across apps.
"""
import math

import numpy as np


def frozen(values, dtype=float, ndim=None):
    """Return a read-only float copy of ``values``."""
    arr = np.array(values, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"Expected a {ndim}-dimensional array, got shape {arr.shape}.")
    arr.setflags(write=False)
    return arr


def compensated_sum(values, axis=None):
    """
    Correctly rounded summation.

    With ``axis`` given, sums each slice along that axis with ``math.fsum``.
    """
    arr = np.asarray(values, dtype=float)
    if axis is None:
        return math.fsum(arr.ravel())
    moved = np.moveaxis(arr, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.fromiter((math.fsum(row) for row in flat), dtype=float, count=flat.shape[0])
    return out.reshape(moved.shape[:-1])


def geometric_grid(start, stop, num):
    """Geometric grid including both endpoints."""
    if start <= 0 or stop <= 0:
        raise ValueError("Geometric grid endpoints must be positive.")
    return np.geomspace(start, stop, num)
