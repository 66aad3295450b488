"""
Point-set and measure generators used by experiments and tests.
"""
import numpy as np
from scipy.spatial.distance import cdist

from .measures import AtomicMeasure


def interval_grid(n, radius, center=0.0):
    """n equally spaced points filling [center - radius, center + radius]."""
    if n < 1:
        raise ValueError("Need at least one point.")
    if n == 1:
        return np.array([[float(center)]])
    return np.linspace(center - radius, center + radius, n).reshape(-1, 1)


def ball_grid(d, radius, n_per_axis, center=None):
    """Cubic lattice points inside the closed ball of the given radius."""
    if d == 1:
        points = interval_grid(n_per_axis, radius)
    else:
        axis = np.linspace(-radius, radius, n_per_axis)
        mesh = np.meshgrid(*([axis] * d), indexing='ij')
        points = np.stack([m.ravel() for m in mesh], axis=1)
        points = points[np.linalg.norm(points, axis=1) <= radius * (1 + 1e-12)]
    if center is not None:
        points = points + np.asarray(center, dtype=float)
    return points


def line_points(n, length=1.0, d=1):
    """n equally spaced collinear points along the first axis."""
    points = np.zeros((n, d))
    points[:, 0] = np.linspace(0.0, length, n)
    return points


def random_cloud(rng, n, d, low=0.0, high=1.0):
    return rng.uniform(low, high, size=(n, d))


def uniform_measure(points, total=1.0):
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    return AtomicMeasure(points, np.full(n, total / n))


def random_measure(rng, n, d, low=0.5, high=1.5):
    """Random cloud in the unit cube with masses drawn from [low, high)."""
    return AtomicMeasure(random_cloud(rng, n, d), rng.uniform(low, high, size=n))


def off_support_grid(points, h, n_per_axis=16, margin=None):
    """
    Uniform grid over the bounding box (widened by ``margin``) keeping only
    the nodes at distance >= h/2 from every atom.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    margin = h if margin is None else margin
    lo = points.min(axis=0) - margin
    hi = points.max(axis=0) + margin
    axes = [np.linspace(lo[k], hi[k], n_per_axis) for k in range(d)]
    mesh = np.meshgrid(*axes, indexing='ij')
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    keep = cdist(grid, points).min(axis=1) >= 0.5 * h
    return grid[keep]


def thin_to_separation(points, h):
    """Greedy subset (in input order) whose pairwise distances are all >= h."""
    points = np.asarray(points, dtype=float)
    kept = []
    for i, p in enumerate(points):
        if not kept or cdist(p[None, :], points[kept]).min() >= h:
            kept.append(i)
    return points[kept]
