"""
Atomic measures on R^d, ball masses and growth-class certification.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist, pdist

from apps.core.arrays import frozen, geometric_grid

logger = logging.getLogger(__name__)

GROWTH_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finitely many atoms with strictly positive masses at distinct points."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        masses = np.array(self.masses, dtype=float, copy=True).reshape(-1)
        if points.ndim != 2 or points.shape[0] != masses.size:
            raise ValueError("Need one mass per point.")
        if points.shape[1] < 1:
            raise ValueError("Points need at least one coordinate.")
        if not np.all(np.isfinite(points)):
            raise ValueError("Point coordinates must be finite.")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise ValueError("Masses must be strictly positive and finite.")
        if masses.size > 1 and np.unique(points, axis=0).shape[0] != masses.size:
            raise ValueError("Points must be pairwise distinct.")
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'masses', masses)

    @classmethod
    def empty(cls, d):
        return cls(np.empty((0, d)), np.empty(0))

    def __len__(self):
        return self.masses.size

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def total_mass(self):
        return math.fsum(self.masses)

    def pairwise_distances(self):
        """Full symmetric distance matrix."""
        return cdist(self.points, self.points)

    def min_separation(self):
        if len(self) < 2:
            return math.inf
        return float(pdist(self.points).min())

    def diameter(self):
        if len(self) < 2:
            return 0.0
        return float(pdist(self.points).max())

    def restrict(self, indices):
        """The measure restricted to the atoms with the given indices."""
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
        return AtomicMeasure(self.points[idx].reshape(-1, self.dimension), self.masses[idx])

    def scaled(self, factor):
        return AtomicMeasure(self.points, self.masses * factor)

    def dilated(self, factor):
        return AtomicMeasure(self.points * factor, self.masses)

    def without_point(self, point):
        """Drop the atom sitting exactly at ``point`` if there is one."""
        keep = ~np.all(self.points == np.asarray(point, dtype=float), axis=1)
        if keep.all():
            return self
        return AtomicMeasure(self.points[keep].reshape(-1, self.dimension), self.masses[keep])


@dataclass(frozen=True)
class BallQuery:
    center: tuple
    radius: float
    closed: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("Ball radius must be positive.")
        object.__setattr__(self, 'center', tuple(float(c) for c in np.atleast_1d(self.center)))


def ball_mass(mu, q, puncture=None):
    """
    Mass of the atoms strictly inside (open) or inside-or-on (closed) the ball.
    With ``puncture`` the atom located exactly there is left out.
    """
    if len(mu) == 0:
        return 0.0
    center = np.asarray(q.center, dtype=float)
    dist = np.linalg.norm(mu.points - center, axis=1)
    inside = dist <= q.radius if q.closed else dist < q.radius
    if puncture is not None:
        inside &= ~np.all(mu.points == np.asarray(puncture, dtype=float), axis=1)
    return math.fsum(mu.masses[inside])


class RadiusSampling(str, Enum):
    BREAKPOINTS = 'breakpoints'
    GEOMETRIC = 'geometric'


@dataclass(frozen=True)
class GrowthSampling:
    """
    Where the growth condition is sampled.

    Breakpoint radii give the exact supremum over r >= h for each center: the
    ratio is maximal just above an atom distance or at r = h.
    """

    radii: RadiusSampling = RadiusSampling.BREAKPOINTS
    n_radii: int = 48
    midpoints: bool = True
    centers: np.ndarray = field(default=None, compare=False)


@dataclass(frozen=True, eq=False)
class GrowthCertificate:
    h: float
    pairs_checked: int
    worst_ratio: float
    worst_center: np.ndarray
    worst_radius: float

    @property
    def passed(self):
        return self.worst_ratio <= 1.0 + GROWTH_TOL


def growth_centers(points, midpoints=True):
    """Atoms plus (optionally) all pairwise midpoints."""
    points = np.asarray(points, dtype=float)
    if not midpoints or points.shape[0] < 2:
        return points.copy()
    i, j = np.triu_indices(points.shape[0], k=1)
    return np.vstack([points, 0.5 * (points[i] + points[j])])


def _center_ratios(dist_row, masses, phi, h, sampling, geo_radii):
    """Largest mass/phi(r) ratio for one center and the radius attaining it."""
    order = np.argsort(dist_row, kind='stable')
    d_sorted = dist_row[order]
    cum = np.cumsum(masses[order])

    below = np.searchsorted(d_sorted, h, side='left')
    best_ratio = (cum[below - 1] if below else 0.0) / float(phi(h))
    best_radius = h
    count = 1

    if sampling.radii == RadiusSampling.BREAKPOINTS:
        candidates = d_sorted[below:]
        if candidates.size:
            closed = cum[np.searchsorted(d_sorted, candidates, side='right') - 1]
            ratios = closed / phi.evaluate(candidates)
            i = int(np.argmax(ratios))
            count += candidates.size
            if ratios[i] > best_ratio:
                best_ratio, best_radius = float(ratios[i]), float(candidates[i])
    else:
        idx = np.searchsorted(d_sorted, geo_radii, side='left')
        open_mass = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        ratios = open_mass / phi.evaluate(geo_radii)
        i = int(np.argmax(ratios))
        count += geo_radii.size
        if ratios[i] > best_ratio:
            best_ratio, best_radius = float(ratios[i]), float(geo_radii[i])
    return best_ratio, best_radius, count


def check_sigma_phi(mu, phi, h, sampling=None):
    """
    Certify mu(B(x, r)) <= phi(r) for r >= h over the sampled centers.
    """
    if not h > 0:
        raise ValueError("Resolution h must be positive.")
    sampling = sampling or GrowthSampling()
    if len(mu) == 0:
        return GrowthCertificate(h, 0, 0.0, np.zeros(mu.dimension), h)
    if sampling.centers is not None:
        centers = np.asarray(sampling.centers, dtype=float).reshape(-1, mu.dimension)
    else:
        centers = growth_centers(mu.points, sampling.midpoints)
    dist = cdist(centers, mu.points)
    geo_radii = None
    if sampling.radii == RadiusSampling.GEOMETRIC:
        top = max(2.0 * mu.diameter(), 2.0 * h)
        geo_radii = geometric_grid(h, top, sampling.n_radii)

    worst = (-1.0, None, h)
    checked = 0
    for c, row in enumerate(dist):
        ratio, radius, count = _center_ratios(row, mu.masses, phi, h, sampling, geo_radii)
        checked += count
        if ratio > worst[0]:
            worst = (ratio, c, radius)
    ratio, c, radius = worst
    center = frozen(centers[c])
    certificate = GrowthCertificate(h, checked, ratio, center, radius)
    logger.debug("growth check at h=%g: worst ratio %.6g over %d pairs", h, ratio, checked)
    return certificate


def rescale_to_sigma(mu, phi, h, sampling=None):
    """Scale mu so that its worst sampled growth ratio at resolution h is 1."""
    if len(mu) == 0:
        raise ValueError("Cannot rescale the zero measure.")
    certificate = check_sigma_phi(mu, phi, h, sampling)
    kappa = 1.0 / certificate.worst_ratio
    return mu.scaled(kappa), kappa
