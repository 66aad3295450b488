"""
Functions of class Phi and their grid-sampled certification.

A member of the class is an increasing differentiable function with
phi(0) = 0, phi(t) -> infinity, a monotone derivative and the doubling
condition phi(2t) <= 2**s * phi(t). Membership is only ever certified on
declared grids.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import PchipInterpolator

from apps.core.exceptions import GrowthConditionError, InvalidFunctionError

logger = logging.getLogger(__name__)

PHI_ZERO_CUTOFF = math.exp(-1.5)

# t = 2**k, k = 0..128, must grow by at least this factor
GROWTH_PROBE = 2.0 ** np.arange(0, 129)
GROWTH_FACTOR = 1e3

DOUBLING_TOL = 1e-12
MONOTONE_TOL = 1e-9


class Convexity(str, Enum):
    CONCAVE = 'concave'
    CONVEX = 'convex'


class PhiFunction:
    """
    Base class for class-Phi functions.

    Subclasses implement ``evaluate`` and ``derivative`` on float arrays and
    expose ``s_doubling``, ``convexity``, ``family`` and ``params``.
    """

    family = 'abstract'
    notes = ()

    def evaluate(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = self.evaluate(arr)
        return float(out) if arr.ndim == 0 else out

    def root(self, t):
        """phi(t) ** (1/s), the function the metric transform is built from."""
        arr = np.asarray(t, dtype=float)
        out = self.evaluate(arr) ** (1.0 / self.s_doubling)
        return float(out) if arr.ndim == 0 else out

    @property
    def params(self):
        return {}

    @property
    def is_concave(self):
        return self.convexity == Convexity.CONCAVE

    def describe(self):
        return {
            'family': self.family,
            'params': self.params,
            's': self.s_doubling,
            'convexity': self.convexity.value,
        }

    def __str__(self):
        args = ','.join(f'{k}={v:g}' for k, v in self.params.items())
        return f'{self.family}({args})'


@dataclass(frozen=True)
class PowerPhi(PhiFunction):
    """phi(t) = t**s."""

    exponent: float
    family = 'power'

    def __post_init__(self):
        if not self.exponent > 0 or not math.isfinite(self.exponent):
            raise ValueError("Power exponent must be a positive finite number.")

    @property
    def s_doubling(self):
        return self.exponent

    @property
    def convexity(self):
        return Convexity.CONCAVE if self.exponent <= 1 else Convexity.CONVEX

    @property
    def params(self):
        return {'exponent': self.exponent}

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, np.abs(t) ** self.exponent, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide='ignore'):
            return self.exponent * t ** (self.exponent - 1.0)

    def root(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.where(arr > 0, arr, 0.0)
        return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class PhiZero(PhiFunction):
    """
    phi_0(t) = (log 1/t)**(-1/2) on (0, e**-1.5], continued by its tangent line.

    e**-1.5 is the inflection point of the logarithmic branch, so the tangent
    continuation keeps the function concave. The doubling exponent is computed
    over (0, t_max].
    """

    t_max: float = 2.0
    slope: float = field(init=False, repr=False)
    intercept: float = field(init=False, repr=False)
    s: float = field(init=False, repr=False)

    family = 'phi_zero'
    notes = ('tangent continuation beyond e^-1.5 (one admissible concave doubling choice)',)

    def __post_init__(self):
        if not self.t_max > PHI_ZERO_CUTOFF:
            raise ValueError("t_max must exceed the logarithmic cutoff e^-1.5.")
        t0 = PHI_ZERO_CUTOFF
        value = 1.5 ** -0.5
        slope = 0.5 * 1.5 ** -1.5 / t0
        object.__setattr__(self, 'slope', slope)
        object.__setattr__(self, 'intercept', value - slope * t0)
        probe = np.geomspace(1e-12, self.t_max, 4096)
        ratios = np.log2(self.evaluate(2.0 * probe) / self.evaluate(probe))
        object.__setattr__(self, 's', float(ratios.max()))

    @property
    def s_doubling(self):
        return self.s

    @property
    def convexity(self):
        return Convexity.CONCAVE

    @property
    def cutoff(self):
        return PHI_ZERO_CUTOFF

    @property
    def params(self):
        return {'t_max': self.t_max}

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        small = (t > 0) & (t <= PHI_ZERO_CUTOFF)
        safe = np.where(small, t, PHI_ZERO_CUTOFF)
        log_branch = (-np.log(safe)) ** -0.5
        tangent = self.intercept + self.slope * t
        return np.where(t <= 0, 0.0, np.where(small, log_branch, tangent))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        small = t <= PHI_ZERO_CUTOFF
        safe = np.where(small & (t > 0), t, PHI_ZERO_CUTOFF)
        log_branch = 0.5 * (-np.log(safe)) ** -1.5 / safe
        return np.where(small, log_branch, self.slope)


@dataclass(frozen=True, eq=False)
class TabulatedPhi(PhiFunction):
    """
    User supplied table of (t, phi(t)) pairs.

    Monotone cubic (PCHIP) interpolation inside the table, linear
    continuation with the end slope beyond it.
    """

    nodes: np.ndarray
    values: np.ndarray
    declared_convexity: Convexity = Convexity.CONCAVE
    declared_s: float = None
    interpolant: PchipInterpolator = field(init=False, repr=False)
    s: float = field(init=False, repr=False)

    family = 'tabulated'

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ValueError("A tabulated function needs matching 1-d arrays with at least two nodes.")
        if nodes[0] > 0:
            nodes = np.concatenate(([0.0], nodes))
            values = np.concatenate(([0.0], values))
        if nodes[0] != 0 or values[0] != 0:
            raise ValueError("A tabulated function must start at (0, 0).")
        if np.any(np.diff(nodes) <= 0) or np.any(np.diff(values) <= 0):
            raise ValueError("Table nodes and values must be strictly increasing.")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'declared_convexity', Convexity(self.declared_convexity))
        object.__setattr__(self, 'interpolant', PchipInterpolator(nodes, values, extrapolate=False))
        if self.declared_s is not None:
            s = float(self.declared_s)
        else:
            probe = np.geomspace(nodes[1], nodes[-1], 512)
            s = float(np.log2(self.evaluate(2.0 * probe) / self.evaluate(probe)).max())
        object.__setattr__(self, 's', s)

    @property
    def s_doubling(self):
        return self.s

    @property
    def convexity(self):
        return self.declared_convexity

    @property
    def params(self):
        return {'nodes': int(self.nodes.size)}

    def _end_slope(self):
        return float(self.interpolant.derivative()(self.nodes[-1]))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        last = self.nodes[-1]
        inside = np.clip(t, 0.0, last)
        out = self.interpolant(inside)
        beyond = self.values[-1] + self._end_slope() * (t - last)
        return np.where(t <= 0, 0.0, np.where(t > last, beyond, out))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        last = self.nodes[-1]
        inside = np.clip(t, 0.0, last)
        out = self.interpolant.derivative()(inside)
        return np.where(t > last, self._end_slope(), out)


def phi_from_spec(spec):
    """Build a function from a validated ``{'family': ..., ...}`` mapping."""
    family = spec['family']
    if family == 'power':
        return PowerPhi(float(spec['exponent']))
    if family == 'phi_zero':
        return PhiZero(t_max=float(spec.get('t_max') or 2.0))
    if family == 'tabulated':
        table = np.loadtxt(spec['table'], delimiter=',', ndmin=2)
        return TabulatedPhi(
            table[:, 0],
            table[:, 1],
            declared_convexity=spec.get('convexity') or Convexity.CONCAVE,
            declared_s=spec.get('s'),
        )
    raise ValueError(f"Unknown function family '{family}'.")


@dataclass(frozen=True)
class PropertyCheck:
    passed: bool
    worst_t: float = None
    worst_value: float = None


@dataclass(frozen=True)
class ValidationReport:
    family: str
    convexity: Convexity
    s_doubling: float
    s_hat: float
    checks: dict
    notes: tuple = ()

    @property
    def passed(self):
        return all(check.passed for check in self.checks.values())


def _require_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("Grid must be a nonempty list of numbers.")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
        raise ValueError("Grid points must be positive and finite.")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("Grid must be strictly increasing.")
    return grid


def _require_finite(ts, values):
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise InvalidFunctionError(float(ts[i]), float(values[i]))


def validate_phi(phi, grid):
    """
    Check properties I-IV of class Phi on a grid.

    I: phi(0) = 0, strictly increasing, finite nonnegative derivative.
    II: phi grows without bound along t = 2**k.
    III: derivative monotone in the declared direction.
    IV: phi(2t) <= 2**s phi(t).
    The extra ``ratio`` check (phi(t)/t nonincreasing) applies to concave phi.
    """
    grid = _require_grid(grid)
    values = phi.evaluate(grid)
    doubled = phi.evaluate(2.0 * grid)
    derivs = phi.derivative(grid)
    _require_finite(grid, values)
    _require_finite(2.0 * grid, doubled)
    _require_finite(grid, derivs)

    checks = {}

    at_zero = float(phi.evaluate(np.array([0.0]))[0])
    steps = np.diff(values)
    bad = np.flatnonzero(steps <= 0)
    if at_zero != 0.0:
        checks['I'] = PropertyCheck(False, 0.0, at_zero)
    elif bad.size:
        checks['I'] = PropertyCheck(False, float(grid[bad[0] + 1]), float(steps[bad[0]]))
    elif np.any(derivs < 0):
        i = int(np.argmin(derivs))
        checks['I'] = PropertyCheck(False, float(grid[i]), float(derivs[i]))
    else:
        checks['I'] = PropertyCheck(True)

    probe = phi.evaluate(GROWTH_PROBE)
    finite = probe[np.isfinite(probe)]
    growing = np.all(np.diff(finite) > 0)
    unbounded = finite.size < probe.size or finite[-1] >= GROWTH_FACTOR * finite[0]
    if growing and unbounded:
        checks['II'] = PropertyCheck(True)
    else:
        checks['II'] = PropertyCheck(False, float(GROWTH_PROBE[finite.size - 1]), float(finite[-1]))

    slope_steps = np.diff(derivs)
    scale = MONOTONE_TOL * np.maximum(np.abs(derivs[:-1]), np.abs(derivs[1:]))
    if phi.convexity == Convexity.CONCAVE:
        excess = slope_steps - scale
    else:
        excess = -slope_steps - scale
    if excess.size and excess.max() > 0:
        i = int(np.argmax(excess))
        checks['III'] = PropertyCheck(False, float(grid[i + 1]), float(excess[i]))
    else:
        checks['III'] = PropertyCheck(True)

    log_ratios = np.log2(doubled / values)
    s_hat = float(log_ratios.max())
    over = log_ratios - phi.s_doubling
    if over.max() > DOUBLING_TOL:
        i = int(np.argmax(over))
        checks['IV'] = PropertyCheck(False, float(grid[i]), float(log_ratios[i]))
    else:
        checks['IV'] = PropertyCheck(True, float(grid[int(np.argmax(log_ratios))]), s_hat)

    if phi.convexity == Convexity.CONCAVE:
        quotient = values / grid
        rises = np.diff(quotient) - MONOTONE_TOL * quotient[:-1]
        if rises.size and rises.max() > 0:
            i = int(np.argmax(rises))
            checks['ratio'] = PropertyCheck(False, float(grid[i + 1]), float(rises[i]))
        else:
            checks['ratio'] = PropertyCheck(True)

    report = ValidationReport(
        family=phi.family,
        convexity=phi.convexity,
        s_doubling=phi.s_doubling,
        s_hat=s_hat,
        checks=checks,
        notes=tuple(phi.notes),
    )
    if not report.passed:
        failed = [name for name, check in checks.items() if not check.passed]
        logger.warning("%s failed property checks %s", phi, failed)
    return report


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    r_grid: np.ndarray
    ratios: np.ndarray
    converged: np.ndarray
    bound: float = None

    @property
    def passed(self):
        return bool(np.all(self.converged)) and math.isfinite(self.value)


def dyadic_lambda_bound(s, d):
    """Upper bound 2**s / (1 - 2**-(d-s)) for the growth-integral constant when s < d."""
    if s >= d:
        return math.inf
    return 2.0 ** s / (1.0 - 2.0 ** -(d - s))


def _dyadic_integral(phi, d, r, points_per_dyad, rel_tol, max_dyads):
    """
    Integral of t**(d-1)/phi(t) over (0, r] by a composite midpoint rule on
    the dyads [r 2**-(k+1), r 2**-k]. Returns (value, converged).
    """
    k = np.arange(max_dyads)
    hi = r * 2.0 ** -k
    lo = 0.5 * hi
    offsets = (np.arange(points_per_dyad) + 0.5) / points_per_dyad
    mids = lo[:, None] + offsets[None, :] * (hi - lo)[:, None]
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        integrand = mids ** (d - 1) / phi.evaluate(mids)
    contributions = integrand.sum(axis=1) * (hi - lo) / points_per_dyad

    resolvable = np.isfinite(contributions) & (lo > 0)
    if not resolvable.all():
        contributions = contributions[:int(np.argmin(resolvable))]
    if contributions.size == 0:
        return math.inf, False
    running = np.cumsum(contributions)
    small = contributions < rel_tol * running
    if small.any():
        stop = int(np.argmax(small))
        return float(running[stop]), True
    return float(running[-1]), False


def verify_growth_integral(phi, d, r_grid, points_per_dyad=64, rel_tol=1e-14,
                           max_dyads=960, overflow=1e12):
    """
    Estimate the constant of the growth-integral condition:

        Lambda = max_r [ int_0^r t**(d-1)/phi(t) dt ] * phi(r) / r**d

    An r whose dyadic chain does not settle is reported as unconverged;
    a ratio beyond ``overflow`` raises GrowthConditionError.
    """
    if d < 1:
        raise ValueError("Dimension must be at least 1.")
    r_grid = _require_grid(r_grid)
    ratios = np.empty_like(r_grid)
    converged = np.zeros(r_grid.shape, dtype=bool)
    for i, r in enumerate(r_grid):
        integral, ok = _dyadic_integral(phi, d, float(r), points_per_dyad, rel_tol, max_dyads)
        ratio = integral * float(phi(r)) / r ** d
        if not ratio <= overflow:
            raise GrowthConditionError(r=float(r), ratio=ratio)
        ratios[i] = ratio
        converged[i] = ok
    if not converged.all():
        logger.warning("%s: dyadic integral did not settle for %d of %d radii",
                       phi, int((~converged).sum()), converged.size)
    ratios.setflags(write=False)
    converged.setflags(write=False)
    return LambdaEstimate(
        value=float(ratios.max()),
        r_grid=r_grid,
        ratios=ratios,
        converged=converged,
        bound=dyadic_lambda_bound(phi.s_doubling, d),
    )
