"""
Calderon-Zygmund constants of K_phi in the induced metric, and the
correspondence between Euclidean and metric balls.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from apps.transform.operators import KernelSpec

logger = logging.getLogger(__name__)

SIZE_TOL = 1e-12


@dataclass(frozen=True)
class CZConstants:
    A: float
    s: float
    delta: float = 1.0

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be positive.")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1].")


def smoothness_candidate(s):
    """4 (2 + 2**s): factor 3 (concave) or 2 + 2**s (convex), times 4."""
    return 4.0 * (2.0 + 2.0 ** s)


@dataclass(frozen=True, eq=False)
class CZReport:
    samples: int
    size_max: float
    smooth_max: float
    candidate_A: float
    size_witness: tuple
    smooth_witness: tuple

    @property
    def size_passed(self):
        return self.size_max <= 1.0 + SIZE_TOL

    @property
    def smooth_passed(self):
        return self.smooth_max <= self.candidate_A

    @property
    def passed(self):
        return self.size_passed and self.smooth_passed


def _unit_vectors(rng, n, d):
    v = rng.normal(size=(n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_cz_triples(psi, sample_count, rng, d=2, coincident_share=0.01):
    """
    Triples (x, x', y) with |x - y| on a psi-grid node, |x - x'| >= grid step
    and dist(x, x') <= dist(x, y) / 2. A small share has x' = x.
    """
    n_nodes = psi.values.size - 1
    y = rng.uniform(0.0, 1.0, size=(sample_count, d))
    k = rng.integers(1, max(n_nodes // 2, 1) + 1, size=sample_count)
    x = y + (k * psi.step)[:, None] * _unit_vectors(rng, sample_count, d)
    dist_xy = psi.values[k]
    reach = psi.inverse(0.5 * dist_xy) * (1.0 - 1e-9)
    lo = np.log(psi.step)
    hi = np.log(np.maximum(reach, psi.step))
    rho = np.exp(lo + (hi - lo) * rng.uniform(size=sample_count))
    rho = np.where(reach >= psi.step, rho, 0.0)
    rho[rng.uniform(size=sample_count) < coincident_share] = 0.0
    x_prime = x + rho[:, None] * _unit_vectors(rng, sample_count, d)
    return x, x_prime, y


def verify_cz_kernel(phi, psi, sample_count, rng_seed, d=2):
    """
    Sample the size and smoothness estimates of K_phi in the metric psi(|.|):

        |K(x, y)| dist(x, y)**s <= 1
        |K(x, y) - K(x', y)| dist(x, y)**(s+1) / dist(x, x') <= 4 (2 + 2**s)
    """
    rng = np.random.default_rng(rng_seed)
    s = phi.s_doubling
    kernel = KernelSpec(phi, d)
    x, x_prime, y = sample_cz_triples(psi, sample_count, rng, d)

    dist_xy = psi(np.linalg.norm(x - y, axis=1))
    dist_xx = psi(np.linalg.norm(x - x_prime, axis=1))
    k_xy = kernel.evaluate(x, y)
    k_xpy = kernel.evaluate(x_prime, y)

    size = np.linalg.norm(k_xy, axis=1) * dist_xy ** s
    moved = dist_xx > 0
    smooth = np.zeros(sample_count)
    diff = np.linalg.norm(k_xy - k_xpy, axis=1)
    smooth[moved] = diff[moved] * dist_xy[moved] ** (s + 1.0) / dist_xx[moved]

    i = int(np.argmax(size))
    j = int(np.argmax(smooth))
    candidate = smoothness_candidate(s)
    report = CZReport(
        samples=sample_count,
        size_max=float(size[i]),
        smooth_max=float(smooth[j]),
        candidate_A=candidate,
        size_witness=(x[i].tolist(), x_prime[i].tolist(), y[i].tolist()),
        smooth_witness=(x[j].tolist(), x_prime[j].tolist(), y[j].tolist()),
    )
    if not report.passed:
        logger.warning("CZ check for %s failed: size %.6g, smoothness %.6g (A=%.6g)",
                       phi, report.size_max, report.smooth_max, candidate)
    return CZConstants(A=candidate, s=s, delta=1.0), report


@dataclass(frozen=True)
class BallCorrespondenceReport:
    samples: int
    mismatches: int
    forward_ratio: float
    forward_bound: float
    converse_ratio: float

    @property
    def passed(self):
        return (
            self.mismatches == 0
            and self.forward_ratio <= self.forward_bound * (1 + 1e-12)
            and self.converse_ratio <= 1.0 + 1e-12
        )


def ball_correspondence_check(phi, psi, mu, samples=64, h=None):
    """
    Compare Euclidean balls B(x, r) with metric balls of radius t = psi(r)
    centred at the atoms, for radii on psi-grid nodes r >= h.

    forward: mu normalised into the Euclidean growth class has metric growth
    ratio at most 2**s. converse: mu normalised into the metric class has
    Euclidean growth ratio at most 1.
    """
    s = phi.s_doubling
    h = psi.step if h is None else h
    nodes = psi.nodes
    usable = np.flatnonzero(nodes >= h)
    usable = usable[usable > 0]
    if len(mu) == 0 or usable.size == 0:
        return BallCorrespondenceReport(0, 0, 0.0, 2.0 ** s, 0.0)
    pick = usable[np.unique(np.linspace(0, usable.size - 1, min(samples, usable.size)).astype(int))]
    radii = nodes[pick]
    t = psi.values[pick]

    dist = cdist(mu.points, mu.points)
    in_range = dist <= psi.r_max
    metric_dist = np.where(in_range, psi(np.where(in_range, dist, 0.0)), np.inf)

    euclid = dist[:, :, None] < radii[None, None, :]
    metric = metric_dist[:, :, None] < t[None, None, :]
    mismatches = int(np.count_nonzero(euclid != metric))

    masses = mu.masses[None, :, None]
    euclid_mass = (euclid * masses).sum(axis=1)
    metric_mass = (metric * masses).sum(axis=1)
    euclid_ratio = euclid_mass / phi.evaluate(radii)[None, :]
    metric_ratio = metric_mass / (t ** s)[None, :]

    e_max = euclid_ratio.max()
    m_max = metric_ratio.max()
    forward = float((metric_ratio / e_max).max()) if e_max > 0 else 0.0
    converse = float((euclid_ratio / m_max).max()) if m_max > 0 else 0.0
    return BallCorrespondenceReport(
        samples=int(euclid.shape[0] * radii.size),
        mismatches=mismatches,
        forward_ratio=forward,
        forward_bound=2.0 ** s,
        converse_ratio=converse,
    )
