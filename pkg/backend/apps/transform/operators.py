"""
Truncated phi-transforms of atomic measures.

For an atomic measure mu the truncated transform of f at x is

    R_eps f(x) = sum_{|y - x| > eps} K(x, y) f(y) m_y,
    K(x, y) = (y - x) / |y - x| / phi(|y - x|).

An evaluation point that coincides with an atom never sees its own atom.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist, pdist

from apps.core.arrays import compensated_sum, frozen
from apps.core.exceptions import ConvergenceError
from apps.measure.generators import off_support_grid

logger = logging.getLogger(__name__)


class KernelKind(str, Enum):
    PHI_RIESZ = 'phi_riesz'


@dataclass(frozen=True, eq=False)
class KernelSpec:
    phi: object
    d: int
    kind: KernelKind = KernelKind.PHI_RIESZ

    def weights(self, dist, eps=0.0):
        """1 / (|y - x| phi(|y - x|)) where |y - x| > eps, else 0."""
        dist = np.asarray(dist, dtype=float)
        keep = dist > eps
        safe = np.where(keep, dist, 1.0)
        return np.where(keep, 1.0 / (safe * self.phi.evaluate(safe)), 0.0)

    def evaluate(self, x, y):
        """K(x, y) for broadcastable arrays of points; zero where x == y."""
        diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        dist = np.linalg.norm(diff, axis=-1)
        return diff * self.weights(dist)[..., None]

    def blocks(self, sources, targets, eps=0.0):
        """K(x_i, y_j) for x_i in sources, y_j in targets, truncated at eps: shape (M, N, d)."""
        sources = np.asarray(sources, dtype=float).reshape(-1, self.d)
        targets = np.asarray(targets, dtype=float).reshape(-1, self.d)
        dist = cdist(sources, targets)
        diff = targets[None, :, :] - sources[:, None, :]
        return diff * self.weights(dist, eps)[..., None], dist


@dataclass(frozen=True, eq=False)
class TruncationSchedule:
    """Either one eps or the sorted distinct pairwise distances of a point set."""

    values: np.ndarray
    exact: bool = False

    def __post_init__(self):
        values = frozen(np.atleast_1d(self.values))
        if np.any(values <= 0) or np.any(np.diff(values) <= 0):
            raise ValueError("Truncations must be positive and strictly increasing.")
        object.__setattr__(self, 'values', values)

    @classmethod
    def single(cls, eps):
        return cls(np.array([float(eps)]))

    @classmethod
    def breakpoints(cls, points):
        points = np.asarray(points, dtype=float)
        if points.shape[0] < 2:
            return cls(np.empty(0), exact=True)
        return cls(np.unique(pdist(points)), exact=True)

    def truncations(self):
        """
        One eps per distinct truncation regime: below the first breakpoint,
        then at each breakpoint except the last (which leaves nothing).
        """
        if not self.exact:
            return self.values
        if self.values.size == 0:
            return self.values
        return np.concatenate(([0.5 * self.values[0]], self.values[:-1]))


def _transform(kernel, mu, weights_f, eps, eval_points):
    k, _ = kernel.blocks(eval_points, mu.points, eps)
    terms = k * (weights_f * mu.masses)[None, :, None]
    return compensated_sum(terms, axis=1)


def apply_truncated(kernel, mu, f, eps, eval_points):
    """R_eps f at every evaluation point, shape (M, d)."""
    if not eps > 0:
        raise ValueError("Truncation eps must be positive.")
    f = np.broadcast_to(np.asarray(f, dtype=float), (len(mu),))
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite.")
    eval_points = np.asarray(eval_points, dtype=float).reshape(-1, kernel.d)
    if len(mu) == 0:
        return np.zeros_like(eval_points)
    return _transform(kernel, mu, f, eps, eval_points)


def limit_transform(kernel, mu, eval_points):
    """R 1 with every other atom included (the eps -> 0 limit off the diagonal)."""
    eval_points = np.asarray(eval_points, dtype=float).reshape(-1, kernel.d)
    if len(mu) == 0:
        return np.zeros_like(eval_points)
    return _transform(kernel, mu, np.ones(len(mu)), 0.0, eval_points)


def truncated_energy(kernel, mu, eps, q=None):
    """
    int_Q |R_eps chi_Q|**2 d mu, with mu restricted to Q (all atoms by default).
    """
    restricted = mu if q is None else mu.restrict(q)
    if len(restricted) == 0:
        return 0.0
    values = apply_truncated(kernel, restricted, 1.0, eps, restricted.points)
    return compensated_sum(restricted.masses * (values ** 2).sum(axis=1))


def weighted_matrix(kernel, mu, eps):
    """
    The stacked (N d) x N matrix with blocks sqrt(m_i m_j) K_k(x_i, x_j), truncated.
    Its spectral norm is the norm of R_eps on L^2(mu).
    """
    k, _ = kernel.blocks(mu.points, mu.points, eps)
    root = np.sqrt(mu.masses)
    w = k * (root[:, None] * root[None, :])[..., None]
    n = len(mu)
    return np.moveaxis(w, 2, 0).reshape(kernel.d * n, n)


MAX_RESTARTS = 4


def _unit(x):
    return x / np.linalg.norm(x)


def _converge(gram, x, tol, max_iter):
    """Power steps from unit x until the Rayleigh quotient settles; 0 on the null space."""
    lam = 0.0
    for iteration in range(1, max_iter + 1):
        y = gram @ x
        y_norm = np.linalg.norm(y)
        if y_norm == 0:
            return 0.0, x
        lam_new = float(x @ y)
        x = y / y_norm
        if abs(lam_new - lam) <= tol * lam_new:
            logger.debug("power iteration settled after %d steps", iteration)
            return lam_new, x
        lam = lam_new
    residual = float(np.linalg.norm(gram @ x - lam * x))
    raise ConvergenceError(
        f"Power iteration did not converge in {max_iter} steps (residual {residual:.3e}).",
        residual=residual,
        iterations=max_iter,
    )


def power_iteration(gram, tol=1e-10, max_iter=100000, seed=0, start=None):
    """
    Largest eigenvalue of a symmetric positive semidefinite matrix.

    A start with no component along the top eigenvector settles on a smaller
    eigenvalue (or on 0 in the null space) and looks converged. Every settled
    run is therefore restarted from its end point plus the next vector of the
    fixed-seed stream, until a restart no longer raises the quotient.
    """
    gram = np.asarray(gram, dtype=float)
    starts = np.random.default_rng(seed)
    x = _unit(starts.normal(size=gram.shape[0]) if start is None else np.asarray(start, dtype=float))
    lam, x = _converge(gram, x, tol, max_iter)
    for restart in range(1, MAX_RESTARTS + 1):
        found, y = _converge(gram, _unit(x + starts.normal(size=gram.shape[0])), tol, max_iter)
        if found <= lam * (1.0 + 10.0 * tol):
            return max(lam, found)
        logger.debug("power iteration restart %d raised the quotient from %.6g to %.6g", restart, lam, found)
        lam, x = found, y
    raise ConvergenceError(
        f"Power iteration still rising after {MAX_RESTARTS} restarts.",
        residual=float(np.linalg.norm(gram @ x - lam * x)),
        iterations=max_iter,
    )


def operator_norm(kernel, mu, eps, tol=1e-10, max_iter=100000, seed=0):
    """Spectral norm of R_eps on L^2(mu) by power iteration on A^T A."""
    if len(mu) == 0:
        raise ValueError("The operator norm needs at least one atom.")
    a = weighted_matrix(kernel, mu, eps)
    if not a.any():
        return 0.0
    return float(np.sqrt(power_iteration(a.T @ a, tol, max_iter, seed)))


def breakpoint_norm_profile(kernel, mu, **options):
    """(eps, ||R_eps||) for every distinct truncation regime of mu."""
    schedule = TruncationSchedule.breakpoints(mu.points)
    return [(float(eps), operator_norm(kernel, mu, eps, **options)) for eps in schedule.truncations()]


def max_breakpoint_norm(kernel, mu, **options):
    profile = breakpoint_norm_profile(kernel, mu, **options)
    return max((norm for _, norm in profile), default=0.0)


def maximal_transform(kernel, mu, eval_points):
    """
    sup over eps of |R_eps 1(x)|, exactly.

    Sorting atoms by decreasing distance from x, the partial sums taken at
    the end of each group of equal distances are all the values R_eps 1(x)
    can take.
    """
    eval_points = np.asarray(eval_points, dtype=float).reshape(-1, kernel.d)
    if len(mu) == 0 or eval_points.shape[0] == 0:
        return np.zeros(eval_points.shape[0])
    k, dist = kernel.blocks(eval_points, mu.points)
    vectors = k * mu.masses[None, :, None]
    order = np.argsort(-dist, axis=1, kind='stable')
    d_sorted = np.take_along_axis(dist, order, axis=1)
    partial = np.cumsum(np.take_along_axis(vectors, order[..., None], axis=1), axis=1)
    group_end = np.ones_like(d_sorted, dtype=bool)
    group_end[:, :-1] = d_sorted[:, :-1] != d_sorted[:, 1:]
    group_end &= d_sorted > 0
    norms = np.where(group_end, np.linalg.norm(partial, axis=2), 0.0)
    return norms.max(axis=1)


def quadratic_form(kernel, mu, q, eps):
    """<R_eps chi_Q, chi_Q> per coordinate, accumulated exactly."""
    idx = np.asarray(sorted(set(int(i) for i in q)), dtype=int)
    if idx.size < 2:
        return np.zeros(kernel.d)
    points = mu.points[idx]
    masses = mu.masses[idx]
    k, _ = kernel.blocks(points, points, eps)
    terms = k * (masses[:, None] * masses[None, :])[..., None]
    return compensated_sum(terms.reshape(-1, kernel.d), axis=0)


def essential_sup_surrogate(kernel, mu, grid):
    """max |R 1| over an off-support grid."""
    grid = np.asarray(grid, dtype=float).reshape(-1, kernel.d)
    if grid.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(limit_transform(kernel, mu, grid), axis=1).max())


@dataclass(frozen=True)
class MaximalExcessReport:
    surrogate: float
    maximal: float
    excess: float
    eval_count: int


def maximal_excess(kernel, mu, h, n_per_axis=16):
    """
    Compare the maximal transform at atoms and grid nodes against the
    off-support essential-sup surrogate; ``excess`` estimates the additive
    constant of the maximal bound.
    """
    grid = off_support_grid(mu.points, h, n_per_axis)
    surrogate = essential_sup_surrogate(kernel, mu, grid)
    eval_points = np.vstack([mu.points, grid])
    maximal = float(maximal_transform(kernel, mu, eval_points).max())
    return MaximalExcessReport(surrogate, maximal, maximal - surrogate, eval_points.shape[0])


def transform_rows(eval_points, values):
    """Rows (coordinates..., components..., norm) for CSV export."""
    eval_points = np.asarray(eval_points, dtype=float)
    values = np.asarray(values, dtype=float).reshape(eval_points.shape[0], -1)
    norms = np.linalg.norm(values, axis=1)
    return [(*p, *v, n) for p, v, n in zip(eval_points.tolist(), values.tolist(), norms.tolist())]
