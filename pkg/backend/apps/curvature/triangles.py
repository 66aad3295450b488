"""
The permutation sum p_phi of point triples, its two-sided bounds and the
symmetrization of the truncated energy.

For a triangle with sides a, b, c and opposite angles alpha, beta, gamma

    p_phi = [phi(a) cos alpha + phi(b) cos beta + phi(c) cos gamma] / (phi(a) phi(b) phi(c)),

which for phi(t) = t is half the squared Menger curvature. Cosines are taken
from the law of cosines with the numerator written as (b - a)(b + a) + c**2.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from apps.core.arrays import compensated_sum, frozen
from apps.core.exceptions import HypothesisError

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-12
MIN_SIDE = 1e-10


@dataclass(frozen=True, eq=False)
class Triangle:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ('x', 'y', 'z'):
            object.__setattr__(self, name, frozen(getattr(self, name), ndim=1))
        if not self.x.shape == self.y.shape == self.z.shape:
            raise ValueError("Triangle vertices must share one dimension.")
        if min(self.raw_sides) == 0:
            raise ValueError("Triangle vertices must be distinct.")

    @property
    def raw_sides(self):
        """|y - x|, |z - y|, |x - z|."""
        return (
            float(np.linalg.norm(self.y - self.x)),
            float(np.linalg.norm(self.z - self.y)),
            float(np.linalg.norm(self.x - self.z)),
        )

    @property
    def sides(self):
        """Side lengths sorted so that a >= b >= c."""
        a, b, c = sorted(self.raw_sides, reverse=True)
        return a, b, c

    @property
    def cosines(self):
        """Cosines of the angles opposite a, b and c."""
        a, b, c = self.sides
        return tuple(float(v) for v in _cosines(np.array(a), np.array(b), np.array(c)))


def equilateral_triangle(side=1.0, d=2):
    """Equilateral triangle in the first two coordinates of R^d."""
    x = np.zeros(d)
    y = np.zeros(d)
    z = np.zeros(d)
    y[0] = side
    z[0], z[1] = 0.5 * side, 0.5 * math.sqrt(3.0) * side
    return Triangle(x, y, z)


def _cosines(a, b, c):
    cos_a = ((b - a) * (b + a) + c * c) / (2.0 * b * c)
    cos_b = ((c - b) * (c + b) + a * a) / (2.0 * c * a)
    cos_c = ((a - c) * (a + c) + b * b) / (2.0 * a * b)
    return cos_a, cos_b, cos_c


def p_phi_sides(a, b, c, phi):
    """p_phi from side lengths; vectorized over arrays of triangles."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    if np.any(a <= 0) or np.any(b <= 0) or np.any(c <= 0):
        raise ValueError("Triangle sides must be positive (coincident points).")
    cos_a, cos_b, cos_c = _cosines(a, b, c)
    pa, pb, pc = phi.evaluate(a), phi.evaluate(b), phi.evaluate(c)
    return cos_a / (pb * pc) + cos_b / (pc * pa) + cos_c / (pa * pb)


def p_phi(tri, phi):
    return float(p_phi_sides(*tri.sides, phi))


def _kernel(u, v, phi):
    diff = np.asarray(v, dtype=float) - np.asarray(u, dtype=float)
    dist = np.linalg.norm(diff)
    return diff / (dist * float(phi(dist)))


def p_phi_permutation_sum(tri, phi):
    """sum over the six orderings (u, v, w) of K(u, v) . K(u, w)."""
    total = []
    for u, v, w in itertools.permutations((tri.x, tri.y, tri.z)):
        total.append(float(_kernel(u, v, phi) @ _kernel(u, w, phi)))
    return math.fsum(total)


def p_phi_cyclic_sum(tri, phi):
    """The same sum over the three cyclic orderings; equals p_phi."""
    cycle = ((tri.x, tri.y, tri.z), (tri.y, tri.z, tri.x), (tri.z, tri.x, tri.y))
    return math.fsum(float(_kernel(u, v, phi) @ _kernel(u, w, phi)) for u, v, w in cycle)


def lower_bound_constant(phi):
    """(1 - 2**(s-1)) / 4; only meaningful for concave phi with s in (0, 1)."""
    s = phi.s_doubling
    if not phi.is_concave or not 0 < s < 1:
        raise HypothesisError(
            f"The lower bound needs a concave function with s in (0, 1); got {phi} with s={s:g}."
        )
    return (1.0 - 2.0 ** (s - 1.0)) / 4.0


@dataclass(frozen=True)
class TriangleBoundReport:
    p: float
    upper: float
    lower: float

    @property
    def upper_margin(self):
        return self.upper - self.p

    @property
    def lower_margin(self):
        return self.p - self.lower

    @property
    def upper_holds(self):
        return self.p <= self.upper * (1.0 + BOUND_TOL)

    @property
    def lower_holds(self):
        return self.p > self.lower * (1.0 - BOUND_TOL)

    @property
    def passed(self):
        return self.upper_holds and self.lower_holds


def bounds_from_sides(a, b, c, phi, lower=True):
    """
    Upper and lower bounds for sorted sides a >= b >= c:

        p_phi <= c / (b phi(b) phi(c)) + 2 / (phi(a) phi(b))
        p_phi >  (1 - 2**(s-1)) / (4 phi(a) phi(b))

    The lower bound is NaN when ``lower`` is false.
    """
    pa, pb, pc = phi.evaluate(a), phi.evaluate(b), phi.evaluate(c)
    upper = c / (b * pb * pc) + 2.0 / (pa * pb)
    if lower:
        low = lower_bound_constant(phi) / (pa * pb)
    else:
        low = np.full_like(upper, np.nan)
    return upper, low


def check_triangle_bounds(phi, tri, lower=True):
    """Evaluate both bounds at one triangle; the lower one requires concave phi with s in (0, 1)."""
    a, b, c = tri.sides
    upper, low = bounds_from_sides(np.array(a), np.array(b), np.array(c), phi, lower)
    return TriangleBoundReport(p=p_phi(tri, phi), upper=float(upper), lower=float(low) if lower else -math.inf)


def sorted_sides(vertices):
    """Sorted side lengths (a >= b >= c) of an (n, 3, d) array of triangles."""
    x, y, z = vertices[:, 0], vertices[:, 1], vertices[:, 2]
    sides = np.stack([
        np.linalg.norm(y - x, axis=1),
        np.linalg.norm(z - y, axis=1),
        np.linalg.norm(x - z, axis=1),
    ], axis=1)
    sides = -np.sort(-sides, axis=1)
    return sides[:, 0], sides[:, 1], sides[:, 2]


def random_triangles(rng, n, d=3, thin_share=0.1, thin_range=(1e-8, 1e-2)):
    """
    n triangles with vertices uniform in the unit cube, rejecting those with a
    side below 1e-10. A ``thin_share`` of them form a thin stratum: z lies at
    a log-uniform distance in ``thin_range`` from x.
    """
    n_thin = int(round(thin_share * n))
    n_bulk = n - n_thin
    bulk = np.empty((0, 3, d))
    while bulk.shape[0] < n_bulk:
        batch = rng.uniform(0.0, 1.0, size=(n_bulk - bulk.shape[0], 3, d))
        _, _, c = sorted_sides(batch)
        bulk = np.concatenate([bulk, batch[c >= MIN_SIDE]])
    if n_thin == 0:
        return bulk
    x = rng.uniform(0.0, 1.0, size=(n_thin, d))
    y = rng.uniform(0.0, 1.0, size=(n_thin, d))
    lo, hi = np.log(thin_range[0]), np.log(thin_range[1])
    length = np.exp(rng.uniform(lo, hi, size=n_thin))
    u = rng.normal(size=(n_thin, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    z = x + length[:, None] * u
    thin = np.stack([x, y, z], axis=1)
    _, _, c = sorted_sides(thin)
    # the x-y side can still collapse; replace those by a fixed offset
    short = c < MIN_SIDE
    thin[short, 1] = thin[short, 0] + 0.5
    return np.concatenate([bulk, thin])


@dataclass(frozen=True, eq=False)
class TriangleCorpusSummary:
    phi: str
    count: int
    upper_violations: int
    lower_violations: int
    min_upper_margin: float
    min_lower_margin: float
    histogram_edges: np.ndarray
    upper_histogram: np.ndarray
    lower_histogram: np.ndarray

    @property
    def passed(self):
        return self.upper_violations == 0 and self.lower_violations == 0

    def histogram_rows(self):
        """Rows (bound, log10 relative margin low, high, count) for CSV export."""
        rows = []
        edges = self.histogram_edges
        for bound, counts in (('upper', self.upper_histogram), ('lower', self.lower_histogram)):
            for lo, hi, count in zip(edges[:-1], edges[1:], counts):
                rows.append((bound, float(lo), float(hi), int(count)))
        return rows


def triangle_corpus(phi, n, rng, d=3, thin_share=0.1, chunk=100000, lower=None,
                   histogram_edges=np.linspace(-16.0, 4.0, 41)):
    """
    Evaluate p_phi and both bounds on ``n`` random triangles.

    Margins are relative (bound - p) / bound and (p - bound) / bound; the
    histograms count log10 of the positive relative margins.
    """
    if lower is None:
        lower = phi.is_concave and 0 < phi.s_doubling < 1
    upper_violations = lower_violations = 0
    min_upper = min_lower = math.inf
    upper_hist = np.zeros(histogram_edges.size - 1, dtype=int)
    lower_hist = np.zeros(histogram_edges.size - 1, dtype=int)
    done = 0
    while done < n:
        size = min(chunk, n - done)
        a, b, c = sorted_sides(random_triangles(rng, size, d, thin_share))
        p = p_phi_sides(a, b, c, phi)
        upper, low = bounds_from_sides(a, b, c, phi, lower)

        upper_rel = (upper - p) / upper
        upper_violations += int(np.count_nonzero(upper_rel < -BOUND_TOL))
        min_upper = min(min_upper, float(upper_rel.min()))
        upper_hist += np.histogram(np.log10(upper_rel[upper_rel > 0]), bins=histogram_edges)[0]
        if lower:
            lower_rel = (p - low) / low
            lower_violations += int(np.count_nonzero(lower_rel <= -BOUND_TOL))
            min_lower = min(min_lower, float(lower_rel.min()))
            lower_hist += np.histogram(np.log10(lower_rel[lower_rel > 0]), bins=histogram_edges)[0]
        done += size
        logger.debug("triangle corpus for %s: %d/%d", phi, done, n)

    if upper_violations or lower_violations:
        logger.warning("%s: %d upper and %d lower bound violations over %d triangles",
                       phi, upper_violations, lower_violations, n)
    logger.info("%s: min relative margins upper %.3e, lower %.3e", phi, min_upper, min_lower)
    return TriangleCorpusSummary(
        phi=str(phi),
        count=n,
        upper_violations=upper_violations,
        lower_violations=lower_violations,
        min_upper_margin=min_upper,
        min_lower_margin=min_lower if lower else math.nan,
        histogram_edges=histogram_edges,
        upper_histogram=upper_hist,
        lower_histogram=lower_hist,
    )


@dataclass(frozen=True)
class EnergyDecomposition:
    pair_term: float
    triple_term: float

    @property
    def total(self):
        return math.fsum((self.pair_term, self.triple_term))


def symmetrize_energy(kernel, mu, eps):
    """
    Split int |R_eps 1|**2 d mu into the coincident-pair part

        sum_{i != j} m_i m_j**2 / phi(|x_i - x_j|)**2

    and the triple part 2 sum_{i<j<k} p_phi(x_i, x_j, x_k) m_i m_j m_k.
    Needs eps below every atom separation.
    """
    n = len(mu)
    if n < 2:
        return EnergyDecomposition(0.0, 0.0)
    if not eps < mu.min_separation():
        raise HypothesisError("truncation merges atoms")
    phi = kernel.phi
    dist = mu.pairwise_distances()
    m = mu.masses

    i, j = np.triu_indices(n, k=1)
    pair_weight = m[i] * m[j] * (m[i] + m[j]) / phi.evaluate(dist[i, j]) ** 2
    pair_term = compensated_sum(pair_weight)

    if n < 3:
        return EnergyDecomposition(pair_term, 0.0)
    triples = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), 3)),
        dtype=int,
    ).reshape(-1, 3)
    ti, tj, tk = triples[:, 0], triples[:, 1], triples[:, 2]
    sides = np.stack([dist[ti, tj], dist[tj, tk], dist[ti, tk]], axis=1)
    sides = -np.sort(-sides, axis=1)
    p = p_phi_sides(sides[:, 0], sides[:, 1], sides[:, 2], phi)
    triple_term = 2.0 * compensated_sum(p * m[ti] * m[tj] * m[tk])
    return EnergyDecomposition(pair_term, triple_term)


def decomposition_rows(decomposition):
    return [('pair', decomposition.pair_term), ('triple', decomposition.triple_term),
            ('total', decomposition.total)]
