"""
The metric transform psi and the induced distance dist(x, y) = psi(|x - y|).

psi is the largest subadditive minorant of g = phi**(1/s), realised on a
uniform grid by the rod-cutting recurrence

    psi[k] = min(g(k dr), min_{0<j<k} psi[j] + g((k-j) dr)).
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import RangeError

logger = logging.getLogger(__name__)

RANGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PsiTable:
    step: float
    values: np.ndarray
    phi: object
    s_doubling: float

    @property
    def nodes(self):
        return self.step * np.arange(self.values.size)

    @property
    def r_max(self):
        return self.step * (self.values.size - 1)

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.r_max * (1 + RANGE_TOL)):
            raise RangeError(f"Separation outside [0, {self.r_max:g}] covered by the psi table.")
        out = np.interp(arr, self.nodes, self.values)
        return float(out) if arr.ndim == 0 else out

    def inverse(self, value):
        """Largest r with psi(r) <= value (psi is strictly increasing on the grid)."""
        return np.interp(value, self.values, self.nodes)

    def to_rows(self):
        return list(zip(self.nodes.tolist(), self.values.tolist()))


def compute_psi(phi, r_max, n_grid):
    """Fill the psi table on {k r_max/n_grid : k = 0..n_grid}."""
    if n_grid < 2:
        raise ValueError("The psi grid needs at least two intervals.")
    if not r_max > 0:
        raise ValueError("r_max must be positive.")
    step = r_max / n_grid
    g = phi.root(step * np.arange(n_grid + 1))
    psi = np.zeros(n_grid + 1)
    splits = 0
    for k in range(1, n_grid + 1):
        best = g[k]
        if k > 1:
            candidate = (psi[1:k] + g[k - 1:0:-1]).min()
            # the unsplit piece wins ties
            if candidate < best:
                best = candidate
                splits += 1
        psi[k] = best
    psi.setflags(write=False)
    logger.debug("psi table for %s: %d nodes, %d split", phi, n_grid + 1, splits)
    return PsiTable(step=step, values=psi, phi=phi, s_doubling=phi.s_doubling)


def brute_force_psi(phi, step, k):
    """Minimum of sum g(part * step) over all compositions of k (small k only)."""
    g = phi.root(step * np.arange(k + 1))
    best = np.inf
    for cuts in itertools.product((False, True), repeat=k - 1):
        total, run = 0.0, 1
        for cut in cuts:
            if cut:
                total += g[run]
                run = 1
            else:
                run += 1
        best = min(best, total + g[run])
    return float(best)


def induced_distance(psi, x, y):
    """psi(|x - y|)."""
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    return psi(r)


@dataclass(frozen=True)
class SandwichCheck:
    nodes: int
    below: int
    above: int
    worst_gap: float

    @property
    def passed(self):
        return self.below == 0 and self.above == 0


def check_sandwich(psi, slack=1e-9):
    """Count nodes with psi < g/2 - slack or psi > g, where g = phi**(1/s)."""
    g = psi.phi.root(psi.nodes)
    below = psi.values < 0.5 * g - slack
    above = psi.values > g
    gap = np.maximum(0.5 * g - psi.values, psi.values - g)
    return SandwichCheck(psi.values.size, int(below.sum()), int(above.sum()), float(gap.max()))


def check_metric_axioms(psi, rng, samples=10000, d=2, slack=1e-12):
    """
    Number of sampled triples violating symmetry or the triangle inequality
    for dist = psi(|.|), with points spread so every separation stays in range.
    """
    side = psi.r_max / (2.0 * np.sqrt(d))
    x, y, z = (rng.uniform(0.0, side, size=(samples, d)) for _ in range(3))
    xy = psi(np.linalg.norm(x - y, axis=1))
    yx = psi(np.linalg.norm(y - x, axis=1))
    yz = psi(np.linalg.norm(y - z, axis=1))
    xz = psi(np.linalg.norm(x - z, axis=1))
    asymmetric = np.count_nonzero(xy != yx)
    triangle = np.count_nonzero(xz > xy + yz + slack)
    return int(asymmetric + triangle)


def identity_gap(psi):
    """max |psi(r) - r| over the nodes; zero up to rounding when phi(t) = t**s."""
    return float(np.abs(psi.values - psi.nodes).max())
