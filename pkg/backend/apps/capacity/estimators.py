"""
Capacity estimators for finite candidate sets at resolution h.

The LP estimators maximise the total mass of a measure on the candidates
subject to sampled growth rows (mass of a ball <= phi(radius) for radii >= h)
and transform rows (the phi-transform of the measure bounded by 1 on an
evaluation grid). The functional estimators maximise

    F(m) = (sum m)**(3/2) * [sum_i m_i W(x_i)]**(-1/2)

for a Wolff-type potential W regularised at scale h.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist, pdist

from apps.core.exceptions import HypothesisError
from apps.measure.generators import ball_grid, interval_grid, off_support_grid
from apps.measure.measures import AtomicMeasure, GrowthSampling, check_sigma_phi, growth_centers
from apps.phi.functions import PhiZero
from apps.transform.operators import KernelSpec, max_breakpoint_norm
from apps.wolff.potentials import WolffKind, WolffOptions, wolff_energy

from .simplex import MAX_PIVOTS, LinearProgram, lp_solve, verify_lp_certificate

logger = logging.getLogger(__name__)

SEPARATION_TOL = 1e-9
UNBOUNDED = 'unbounded-at-resolution'
WIDE_SET = 'diameter-exceeds-one'
BOX_BINDING = 'box-binding'
SANDWICH_LIMIT = 100.0
BESSEL_SPREAD = 10.0
SLOPE_RANGE = (-1.0, -0.25)


class CapacityMethod(str, Enum):
    LP_GAMMA_PLUS = 'lp_gamma_plus'
    MAXIMAL_STAR = 'maximal_star'
    OPERATOR_OP = 'operator_op'
    WOLFF_FUNCTIONAL = 'wolff_functional'
    BESSEL_SURROGATE = 'bessel_surrogate'
    RIESZ_FUNCTIONAL = 'riesz_functional'


class DirectionStrategy(str, Enum):
    COORDINATE = 'coordinate'
    SAMPLED = 'sampled'


@dataclass(frozen=True, eq=False)
class CapacityEstimate:
    value: float
    method: CapacityMethod
    h: float
    masses: np.ndarray
    certificate: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def unbounded(self):
        return UNBOUNDED in self.flags

    def digest(self):
        """SHA-256 of the certificate masses."""
        masses = np.ascontiguousarray(self.masses, dtype='<f8')
        return hashlib.sha256(masses.tobytes()).hexdigest()


def _candidates(points, h):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if not h > 0:
        raise ValueError("Resolution h must be positive.")
    if points.shape[0] > 1 and pdist(points).min() < h * (1.0 - SEPARATION_TOL):
        raise ValueError("Candidate atoms must be separated by at least h.")
    return points


class GrowthRowBuilder:
    """
    Rows sum_{j in S} m_j <= phi(r) for every atom set S that a ball of
    radius r >= h around a sampled center can hold.

    Around one center the binding radii are r = h (open ball) and each atom
    distance d >= h (closed ball, limit from above). Rows with the same atom
    set are merged keeping the smallest right-hand side.
    """

    def __init__(self, points, phi, h, centers=None, midpoints=True):
        self.points = np.asarray(points, dtype=float)
        self.phi = phi
        self.h = h
        if centers is None:
            centers = growth_centers(self.points, midpoints)
        self.centers = np.asarray(centers, dtype=float).reshape(-1, self.points.shape[1])

    def build(self):
        n = self.points.shape[0]
        if n == 0:
            return np.empty((0, 0)), np.empty(0)
        dist = cdist(self.centers, self.points)
        masks = [dist < self.h]
        rhs = [np.full(dist.shape[0], float(self.phi(self.h)))]
        order = np.argsort(dist, axis=1, kind='stable')
        d_sorted = np.take_along_axis(dist, order, axis=1)
        for k in range(n):
            radius = d_sorted[:, k]
            keep = radius >= self.h
            if not keep.any():
                continue
            masks.append(dist[keep] <= radius[keep, None])
            rhs.append(self.phi.evaluate(radius[keep]))
        masks = np.vstack(masks)
        rhs = np.concatenate(rhs)
        nonempty = masks.any(axis=1)
        masks, rhs = masks[nonempty], rhs[nonempty]
        packed = np.packbits(masks, axis=1)
        _, first, inverse = np.unique(packed, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        best = np.full(first.size, np.inf)
        np.minimum.at(best, inverse, rhs)
        logger.debug("growth rows: %d sampled, %d distinct atom sets", rhs.size, first.size)
        return masks[first].astype(float), best


def direction_set(strategy, d, n_directions=16, seed=0):
    """
    Unit directions, the per-direction bound and the conservatism factor.

    Coordinate directions with bound 1/sqrt(d) imply a Euclidean bound of 1
    (conservative by at most sqrt(d)). Sampled directions with bound 1 relax
    the Euclidean ball from outside.
    """
    strategy = DirectionStrategy(strategy)
    axes = np.eye(d)
    if strategy == DirectionStrategy.COORDINATE or d == 1:
        bound = 1.0 / math.sqrt(d)
        return axes, bound, math.sqrt(d)
    rng = np.random.default_rng(seed)
    extra = rng.normal(size=(max(n_directions - d, 0), d))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([axes, extra]), 1.0, 1.0


def _transform_rows(kernel, points, eval_points, directions, bound, star):
    k, dist = kernel.blocks(eval_points, points)
    proj = np.einsum('mnd,ud->mun', k, directions)
    if not star:
        rows = proj.reshape(-1, points.shape[0])
    else:
        # one row per suffix of the atoms sorted by decreasing distance
        n = points.shape[0]
        blocks = []
        lower = np.tril(np.ones((n, n), dtype=bool))
        for m in range(eval_points.shape[0]):
            order = np.argsort(-dist[m], kind='stable')
            d_sorted = dist[m, order]
            ends = np.ones(n, dtype=bool)
            ends[:-1] = d_sorted[:-1] != d_sorted[1:]
            ends &= d_sorted > 0
            if not ends.any():
                continue
            for u in range(directions.shape[0]):
                sorted_proj = proj[m, u, order]
                suffix = np.where(lower[ends], sorted_proj[None, :], 0.0)
                row = np.zeros_like(suffix)
                row[:, order] = suffix
                blocks.append(row)
        rows = np.vstack(blocks) if blocks else np.empty((0, n))
    rows = rows[np.any(rows != 0, axis=1)]
    return np.vstack([rows, -rows]), np.full(2 * rows.shape[0], bound)


@dataclass(frozen=True, eq=False)
class CapacityLP:
    program: LinearProgram
    growth_rows: int
    transform_rows: int
    eval_points: np.ndarray
    conservatism: float


def build_capacity_lp(points, phi, h, eval_points=None, direction=DirectionStrategy.COORDINATE,
                      n_directions=16, enforce_growth=True, centers=None, n_per_axis=16,
                      include_atoms=True, star=False, seed=0):
    """
    The LP behind gamma_phi_plus_lower (star=False) and gamma_star_estimate
    (star=True: transform rows at every truncation of every evaluation point).
    """
    points = _candidates(points, h)
    n, d = points.shape
    kernel = KernelSpec(phi, d)
    if eval_points is None:
        eval_points = off_support_grid(points, h, n_per_axis)
    eval_points = np.asarray(eval_points, dtype=float).reshape(-1, d)
    if include_atoms:
        eval_points = np.vstack([eval_points, points])

    blocks, rhs = [], []
    growth_count = 0
    if enforce_growth:
        g_rows, g_rhs = GrowthRowBuilder(points, phi, h, centers).build()
        blocks.append(g_rows)
        rhs.append(g_rhs)
        growth_count = g_rhs.size
    directions, bound, conservatism = direction_set(direction, d, n_directions, seed)
    t_rows, t_rhs = _transform_rows(kernel, points, eval_points, directions, bound, star)
    blocks.append(t_rows)
    rhs.append(t_rhs)

    diameter = float(pdist(points).max()) if n > 1 else 0.0
    blocks.append(np.ones((1, n)))
    rhs.append(np.array([n * float(phi(max(2.0 * diameter, h)))]))

    program = LinearProgram(c=np.ones(n), A=np.vstack(blocks), b=np.concatenate(rhs))
    return CapacityLP(program, growth_count, t_rhs.size, eval_points, conservatism)


def _lp_estimate(method, points, phi, h, max_pivots=MAX_PIVOTS, **options):
    capacity_lp = build_capacity_lp(points, phi, h, star=(method == CapacityMethod.MAXIMAL_STAR), **options)
    program = capacity_lp.program
    solution = lp_solve(program, max_pivots=max_pivots)
    check = verify_lp_certificate(program, solution)
    flags = []
    box_row = program.shape[0] - 1
    if box_row in solution.binding:
        logger.warning("%s at h=%g: total-mass box constraint binding", method.value, h)
        flags.append(BOX_BINDING)
    if not check.passed:
        logger.warning("%s at h=%g: LP certificate residuals %.3e / %.3e / %.3e",
                       method.value, h, check.primal_residual, check.dual_residual, check.gap)
    return CapacityEstimate(
        value=solution.value,
        method=method,
        h=h,
        masses=solution.x,
        certificate={
            'rows': program.shape[0],
            'growth_rows': capacity_lp.growth_rows,
            'transform_rows': capacity_lp.transform_rows,
            'eval_points': capacity_lp.eval_points.shape[0],
            'binding': len(solution.binding),
            'pivots': solution.iterations,
            'conservatism': capacity_lp.conservatism,
            'certified': check.passed,
        },
        flags=tuple(flags),
    )


def gamma_phi_plus_lower(points, phi, h, **options):
    """
    Largest total mass on the candidates with sampled growth at most phi and
    transform at most 1 on the evaluation grid (plus the atoms, each
    excluding itself).

    The default grid is the off-support grid of the candidates, whose nodes
    sit h/2 away from the atoms. Its transform rows can bind before the
    growth rows do, so a single candidate gets less than phi(h). It gets
    exactly phi(h) only with no grid, ``eval_points=np.empty((0, d))``.
    """
    return _lp_estimate(CapacityMethod.LP_GAMMA_PLUS, points, phi, h, **options)


def gamma_star_estimate(points, phi, h, **options):
    """As gamma_phi_plus_lower with the maximal transform bounded instead."""
    return _lp_estimate(CapacityMethod.MAXIMAL_STAR, points, phi, h, **options)


def _positive_measure(points, masses, rel=1e-14):
    masses = np.asarray(masses, dtype=float)
    if masses.size == 0 or not masses.max() > 0:
        return None
    keep = masses > rel * masses.max()
    return AtomicMeasure(points[keep], masses[keep])


def gamma_op_estimate(points, phi, h, profile=None, power_options=None, **options):
    """
    kappa * ||mu|| for the largest kappa with kappa mu in the growth class at h
    and every breakpoint operator norm of kappa mu at most 1. Both constraints
    are linear in kappa, so kappa is the smaller of the two reciprocals.
    The mass profile defaults to the gamma_star_estimate certificate.
    """
    points = _candidates(points, h)
    power_options = power_options or {}
    if profile is None:
        profile = gamma_star_estimate(points, phi, h, **options).masses
    mu = _positive_measure(points, profile)
    if mu is None:
        return CapacityEstimate(0.0, CapacityMethod.OPERATOR_OP, h, np.zeros(points.shape[0]))
    sampling = GrowthSampling(centers=options.get('centers'))
    growth = check_sigma_phi(mu, phi, h, sampling).worst_ratio
    norm = max_breakpoint_norm(KernelSpec(phi, mu.dimension), mu, **power_options)
    growth_cap = 1.0 / growth
    norm_cap = 1.0 / norm if norm > 0 else math.inf
    kappa = min(growth_cap, norm_cap)

    scaled = mu.scaled(kappa)
    feasible = (
        check_sigma_phi(scaled, phi, h, sampling).worst_ratio <= 1.0 + 1e-9
        and kappa * norm <= 1.0 + 1e-9
    )
    if not feasible:
        logger.warning("operator capacity at h=%g: rescaled profile fails its re-check", h)
    masses = np.zeros(points.shape[0])
    index = {tuple(p): i for i, p in enumerate(points.tolist())}
    for p, m in zip(scaled.points.tolist(), scaled.masses):
        masses[index[tuple(p)]] = m
    masses.setflags(write=False)
    return CapacityEstimate(
        value=scaled.total_mass,
        method=CapacityMethod.OPERATOR_OP,
        h=h,
        masses=masses,
        certificate={
            'kappa': kappa,
            'growth_ratio': growth,
            'operator_norm': norm,
            'limited_by': 'growth' if growth_cap <= norm_cap else 'norm',
            'certified': feasible,
        },
    )


@dataclass(frozen=True)
class FunctionalOptions:
    restarts: int = 8
    max_iter: int = 2000
    tol: float = 1e-10
    damping: float = 0.5
    seed: int = 0
    puncture: bool = False


def _max_tensor(points, h):
    dist = cdist(points, points)
    return np.maximum(np.maximum(dist[:, :, None], dist[:, None, :]), h)


def _cubic(tensor, m):
    return float(np.einsum('ijl,i,j,l->', tensor, m, m, m))


def _cubic_gradient(tensor, m):
    return np.einsum('ijl,j,l->i', tensor, m, m) + 2.0 * np.einsum('jil,j,l->i', tensor, m, m)


def _minimize_on_simplex(tensor, options):
    """
    Minimise the homogeneous cubic sum T_ijl m_i m_j m_l over the simplex by
    multiplicative updates m_i <- m_i (3E / dE_i)**damping; the fixed points
    satisfy dE_i = 3E on the support. Returns (energy, masses, converged).
    """
    n = tensor.shape[0]
    rng = np.random.default_rng(options.seed)
    best = (math.inf, None, False)
    for restart in range(options.restarts):
        m = np.full(n, 1.0 / n) if restart == 0 else rng.dirichlet(np.ones(n))
        converged = False
        for _ in range(options.max_iter):
            energy = _cubic(tensor, m)
            if energy <= 0:
                converged = True
                break
            grad = _cubic_gradient(tensor, m)
            support = m > 1e-12 * m.max()
            if np.abs(grad[support] / (3.0 * energy) - 1.0).max() <= options.tol:
                converged = True
                break
            m = m * np.where(grad > 0, 3.0 * energy / np.where(grad > 0, grad, 1.0), 1.0) ** options.damping
            m /= m.sum()
        energy = _cubic(tensor, m)
        if energy < best[0]:
            best = (energy, m, converged)
    return best


def _functional_estimate(method, points, h, tensor, options, flags=()):
    flags = list(flags)
    n = points.shape[0]
    if n == 0:
        raise ValueError("The functional needs at least one candidate.")
    if options.puncture:
        # each atom alone has zero punctured energy, so F is unbounded
        masses = np.zeros(n)
        masses[0] = 1.0
        masses.setflags(write=False)
        return CapacityEstimate(math.inf, method, h, masses, {'converged': True}, tuple(flags + [UNBOUNDED]))
    energy, masses, converged = _minimize_on_simplex(tensor, options)
    if not converged:
        logger.debug("%s at h=%g: multiplicative updates stopped before the tolerance", method.value, h)
    masses = masses.copy()
    masses.setflags(write=False)
    value = energy ** -0.5 if energy > 0 else math.inf
    if not math.isfinite(value):
        flags.append(UNBOUNDED)
    return CapacityEstimate(value, method, h, masses, {'energy': energy, 'converged': converged}, tuple(flags))


def wolff_capacity_functional(points, phi, h, options=FunctionalOptions()):
    """
    Maximise F over masses on the candidates with the Wolff potential
    regularised at h: every atom is treated as mass spread at scale h, i.e.
    sum_i m_i W(x_i) = 1/2 sum_ijl m_i m_j m_l phi(max(D_ij, D_il, h))**-2.
    """
    points = _candidates(points, h)
    tensor = 0.5 / phi.evaluate(_max_tensor(points, h)) ** 2
    return _functional_estimate(CapacityMethod.WOLFF_FUNCTIONAL, points, h, tensor, options)


def bessel_surrogate(points, h, options=FunctionalOptions()):
    """
    The same functional for W(x) = int_0^1 mu(B(x, t))**2 dt / t, the Wolff
    potential equivalent to the (2d/3, 3/2) Bessel capacity. Reported as the
    functional value only.
    """
    points = _candidates(points, h)
    flags = []
    if points.shape[0] > 1 and pdist(points).max() > 1.0:
        logger.warning("Bessel surrogate on a set of diameter > 1")
        flags.append(WIDE_SET)
    tensor = np.maximum(0.0, -np.log(_max_tensor(points, h)))
    return _functional_estimate(CapacityMethod.BESSEL_SURROGATE, points, h, tensor, options, flags)


def riesz_functional(points, phi, h, options=FunctionalOptions()):
    """
    The functional for the s-Riesz Wolff potential int (mu(B)/r**s)**2 dr / r,
    available when phi(t) = t**s.
    """
    if phi.family != 'power':
        raise HypothesisError("The Riesz functional needs a power function.")
    points = _candidates(points, h)
    s = phi.s_doubling
    tensor = _max_tensor(points, h) ** (-2.0 * s) / (2.0 * s)
    return _functional_estimate(CapacityMethod.RIESZ_FUNCTIONAL, points, h, tensor, options)


def wolff_functional_value(points, masses, phi=None, options=WolffOptions(), kind=WolffKind.PHI):
    """
    F(m) evaluated through the closed-form potentials. Atoms with zero mass
    are dropped; zero energy gives +inf.
    """
    points = np.asarray(points, dtype=float)
    points = points.reshape(points.shape[0], -1)
    mu = _positive_measure(points, masses, rel=0.0)
    if mu is None:
        raise ValueError("The functional is undefined for the zero measure.")
    energy = wolff_energy(mu, kind, options=options, phi=phi)
    if energy == 0:
        return math.inf
    return mu.total_mass ** 1.5 / math.sqrt(energy)


@dataclass(frozen=True)
class ComparisonRow:
    instance_id: int
    n_atoms: int
    first: float
    second: float

    @property
    def ratio(self):
        if self.second == 0:
            return math.inf if self.first > 0 else math.nan
        return self.first / self.second


def star_vs_plus(points, phi, h, instance_id=0, **options):
    """(gamma_plus, gamma_star) on identical inputs; gamma_star never exceeds gamma_plus."""
    plus = gamma_phi_plus_lower(points, phi, h, **options)
    star = gamma_star_estimate(points, phi, h, **options)
    return ComparisonRow(instance_id, len(plus.masses), plus.value, star.value)


def op_vs_star(points, phi, h, instance_id=0, **options):
    """(gamma_op, gamma_star), the operator estimate built from the star profile."""
    star = gamma_star_estimate(points, phi, h, **options)
    op = gamma_op_estimate(points, phi, h, profile=star.masses, **options)
    return ComparisonRow(instance_id, len(star.masses), op.value, star.value)


@dataclass(frozen=True, eq=False)
class SandwichReport:
    rows: tuple
    lower: float
    upper: float

    @property
    def spread(self):
        return self.upper / self.lower if self.lower > 0 else math.inf

    @property
    def passed(self):
        return self.spread <= SANDWICH_LIMIT


def capacity_vs_wolff(point_sets, phi, h, functional_options=FunctionalOptions(), **options):
    """
    gamma_plus against the regularised Wolff functional on each point set;
    the corpus constants are the extreme ratios.
    """
    rows = []
    for instance_id, points in enumerate(point_sets):
        plus = gamma_phi_plus_lower(points, phi, h, **options)
        wolff = wolff_capacity_functional(points, phi, h, functional_options)
        rows.append(ComparisonRow(instance_id, len(plus.masses), plus.value, wolff.value))
    ratios = [r.ratio for r in rows if math.isfinite(r.ratio) and r.ratio > 0]
    if not ratios:
        return SandwichReport(tuple(rows), math.nan, math.nan)
    report = SandwichReport(tuple(rows), min(ratios), max(ratios))
    if not report.passed:
        logger.warning("capacity vs Wolff functional: ratio spread %.3g", report.spread)
    return report


def _log_slope(log_inv_r, values):
    return float(np.polyfit(np.log(log_inv_r), np.log(values), 1)[0])


@dataclass(frozen=True, eq=False)
class BesselComparisonReport:
    rows: tuple
    spread: float
    slope_plus: float
    slope_bessel: float

    @property
    def passed(self):
        lo, hi = SLOPE_RANGE
        return (
            self.spread <= BESSEL_SPREAD
            and lo <= self.slope_plus <= hi
            and lo <= self.slope_bessel <= hi
        )


def bessel_comparison(r_grid=None, d=1, n_atoms=64, phi=None, h=None,
                           functional_options=FunctionalOptions(), **options):
    """
    gamma_plus for phi_0 against the Bessel surrogate on grids filling balls
    of radius r <= e**-1.5. h defaults to the grid spacing. Both columns
    should fall like (log 1/r)**(-1/2); the slopes are fitted in log-log of
    log(1/r).
    """
    r_grid = np.exp(-np.arange(3.0, 9.0)) if r_grid is None else np.asarray(r_grid, dtype=float)
    phi = phi or PhiZero()
    rows = []
    for r in r_grid:
        if d == 1:
            points = interval_grid(n_atoms, r)
        else:
            points = ball_grid(d, r, max(2, int(round(n_atoms ** (1.0 / d)))))
        if points.shape[0] < 3:
            logger.info("r=%g: %d atoms, skipped", r, points.shape[0])
            continue
        step = float(pdist(points).min())
        resolution = step if h is None else h
        plus = gamma_phi_plus_lower(points, phi, resolution, **options)
        bessel = bessel_surrogate(points, resolution, functional_options)
        if not (plus.value > 0 and math.isfinite(bessel.value)):
            continue
        rows.append((float(r), math.log(1.0 / r), resolution, plus.value, bessel.value,
                     plus.value / bessel.value))
        logger.info("r=%.4g: gamma_plus %.6g, bessel %.6g", r, plus.value, bessel.value)
    if len(rows) < 2:
        return BesselComparisonReport(tuple(rows), math.nan, math.nan, math.nan)
    table = np.array(rows)
    ratios = table[:, 5]
    return BesselComparisonReport(
        rows=tuple(rows),
        spread=float(ratios.max() / ratios.min()),
        slope_plus=_log_slope(table[:, 1], table[:, 3]),
        slope_bessel=_log_slope(table[:, 1], table[:, 4]),
    )


def refinement_study(radius, phi, counts=(8, 16, 32, 64), d=1, **options):
    """gamma_plus and gamma_star as the grid on a ball refines and h = spacing shrinks."""
    rows = []
    for n in counts:
        points = interval_grid(n, radius) if d == 1 else ball_grid(d, radius, n)
        if points.shape[0] < 2:
            continue
        h = float(pdist(points).min())
        pair = star_vs_plus(points, phi, h, **options)
        rows.append((points.shape[0], h, pair.first, pair.second))
    return rows
