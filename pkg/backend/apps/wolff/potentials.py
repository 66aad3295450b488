"""
Wolff potentials of atomic measures in closed form.

t -> mu(B(x, t)) is a step function with jumps at the distinct distances
l_1 < ... < l_K from x to the atoms, so every potential is a finite sum of
segment integrals over (l_k, l_{k+1}] with constant mass M_k.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from apps.core.arrays import compensated_sum

logger = logging.getLogger(__name__)


class WolffKind(str, Enum):
    PHI = 'phi'
    S_METRIC = 's_metric'
    BESSEL = 'bessel'


@dataclass(frozen=True)
class WolffOptions:
    puncture: bool = True
    eps_floor: float = 0.0

    def __post_init__(self):
        if self.eps_floor < 0:
            raise ValueError("The truncation floor must be nonnegative.")


@dataclass(frozen=True)
class WolffValue:
    value: float
    punctured: bool
    eps_floor: float = 0.0

    def __float__(self):
        return self.value


def step_profile(mu, x, puncture=False, radius=None):
    """
    Distinct distances from x (ascending) and the mass of the open ball just
    beyond each of them. ``radius`` maps Euclidean distances to another
    radial variable (e.g. the induced metric).
    """
    if len(mu) == 0:
        return np.empty(0), np.empty(0)
    x = np.asarray(x, dtype=float)
    masses = mu.masses
    dist = np.linalg.norm(mu.points - x, axis=1)
    if puncture:
        keep = dist > 0
        dist, masses = dist[keep], masses[keep]
        if dist.size == 0:
            return np.empty(0), np.empty(0)
    if radius is not None:
        dist = np.asarray(radius(dist), dtype=float)
    order = np.argsort(dist, kind='stable')
    dist = dist[order]
    cum = np.cumsum(masses[order])
    ends = np.ones(dist.size, dtype=bool)
    ends[:-1] = dist[:-1] != dist[1:]
    return dist[ends], cum[ends]


def _segments(ell, eps_floor, upper=math.inf):
    lower = np.maximum(ell, eps_floor)
    top = np.minimum(np.append(ell[1:], math.inf), upper)
    return lower, top, top > lower


def phi_segment_values(phi, ell, mass, eps_floor=0.0, upper=math.inf):
    """M_k**2 (phi(a)**-2 - phi(b)**-2) / 2 for every segment."""
    if ell.size == 0:
        return np.empty(0)
    a, b, live = _segments(ell, eps_floor, upper)
    with np.errstate(divide='ignore'):
        inv_a = 1.0 / phi.evaluate(a) ** 2
        inv_b = np.where(np.isinf(b), 0.0, 1.0 / phi.evaluate(np.where(np.isinf(b), 1.0, b)) ** 2)
        values = mass ** 2 * (inv_a - inv_b) / 2.0
    return np.where(live, values, 0.0)


def _total(values):
    if np.isinf(values).any():
        return math.inf
    return compensated_sum(values)


def wolff_phi(mu, phi, x, puncture=False, eps_floor=0.0):
    """
    W_phi(x) = int_eps^inf (mu(B(x,t)) / phi(t))**2 dphi(t) / phi(t).

    Infinite exactly when x carries an atom that is not punctured and eps = 0.
    """
    ell, mass = step_profile(mu, x, puncture)
    value = _total(phi_segment_values(phi, ell, mass, eps_floor))
    return WolffValue(value, puncture, eps_floor)


def wolff_s_metric(mu, psi, s, x, puncture=False, eps_floor=0.0):
    """
    W_s(x) = int (mu(metric ball of radius r) / r**s)**2 dr / r in the metric
    psi(|.|). ``eps_floor`` is a Euclidean truncation, i.e. psi(eps) in metric radius.
    """
    ell, mass = step_profile(mu, x, puncture, radius=psi)
    floor = psi(eps_floor) if eps_floor > 0 else 0.0
    if ell.size == 0:
        return WolffValue(0.0, puncture, eps_floor)
    a, b, live = _segments(ell, floor)
    with np.errstate(divide='ignore'):
        values = mass ** 2 * (a ** (-2.0 * s) - np.where(np.isinf(b), 0.0, b ** (-2.0 * s))) / (2.0 * s)
    return WolffValue(_total(np.where(live, values, 0.0)), puncture, eps_floor)


def bessel_segment_values(ell, mass, eps_floor=0.0):
    """M_k**2 log(b / a) for the parts of the segments inside (eps, 1]."""
    if ell.size == 0:
        return np.empty(0)
    a, b, live = _segments(ell, eps_floor, upper=1.0)
    with np.errstate(divide='ignore'):
        values = mass ** 2 * np.log(np.where(live, b, 1.0) / np.where(live, a, 1.0))
    return np.where(live, values, 0.0)


def wolff_bessel_2d3(mu, x, puncture=False, eps_floor=0.0):
    """
    W(x) = int_0^1 mu(B(x, t))**2 dt / t, the Wolff potential of the
    (2d/3, 3/2) Bessel capacity.
    """
    ell, mass = step_profile(mu, x, puncture)
    value = _total(bessel_segment_values(ell, mass, eps_floor))
    return WolffValue(value, puncture, eps_floor)


def wolff_potential(kind, mu, x, options=WolffOptions(), phi=None, psi=None):
    kind = WolffKind(kind)
    if kind == WolffKind.PHI:
        return wolff_phi(mu, phi, x, options.puncture, options.eps_floor)
    if kind == WolffKind.S_METRIC:
        return wolff_s_metric(mu, psi, psi.s_doubling, x, options.puncture, options.eps_floor)
    return wolff_bessel_2d3(mu, x, options.puncture, options.eps_floor)


def wolff_energy(mu, kind, q=None, options=WolffOptions(), phi=None, psi=None):
    """sum_{i in Q} m_i W(mu|Q, x_i) for the chosen potential."""
    restricted = mu if q is None else mu.restrict(q)
    if len(restricted) == 0:
        return 0.0
    values = np.array([
        wolff_potential(kind, restricted, point, options, phi=phi, psi=psi).value
        for point in restricted.points
    ])
    return _total(restricted.masses * values)


def quadrature_potential(kind, mu, x, options=WolffOptions(), phi=None, psi=None):
    """
    The same potential by adaptive quadrature over each interval on which the
    ball mass is constant. Slow; used to cross-check the closed forms.
    """
    kind = WolffKind(kind)
    x = np.asarray(x, dtype=float)
    dist = np.linalg.norm(mu.points - x, axis=1) if len(mu) else np.empty(0)
    masses = mu.masses if len(mu) else np.empty(0)
    floor, top = options.eps_floor, math.inf

    if kind == WolffKind.PHI:
        radial = dist

        def density(t):
            return float(phi.derivative(t)) / float(phi.evaluate(t)) ** 3
    elif kind == WolffKind.S_METRIC:
        radial = np.asarray(psi(dist), dtype=float) if dist.size else dist
        floor = psi(floor) if floor > 0 else 0.0
        s = psi.s_doubling

        def density(r):
            return r ** (-2.0 * s - 1.0)
    else:
        radial, top = dist, 1.0

        def density(t):
            return 1.0 / t

    if options.puncture:
        keep = dist > 0
        radial, masses = radial[keep], masses[keep]
    if floor == 0.0 and np.any(radial == 0):
        return WolffValue(math.inf, options.puncture, options.eps_floor)

    inner = radial[(radial > floor) & (radial < top)]
    edges = np.unique(np.concatenate(([floor], inner, [top])))
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = math.fsum(masses[radial <= a])
        if m == 0:
            continue
        value, _ = integrate.quad(density, a, b, limit=200, epsabs=0.0, epsrel=1e-12)
        pieces.append(m * m * value)
    value = compensated_sum(pieces) if pieces else 0.0
    return WolffValue(value, options.puncture, options.eps_floor)


def phi_zero_log_identity(mu, phi_zero, x, puncture=True):
    """
    Segment-wise values of the phi_0 potential on (0, e**-1.5] and of
    (1/2) int mu(B)**2 dt / t on the same segments; they coincide.
    """
    ell, mass = step_profile(mu, x, puncture)
    cutoff = phi_zero.cutoff
    phi_side = phi_segment_values(phi_zero, ell, mass, upper=cutoff)
    a, b, live = _segments(ell, 0.0, upper=cutoff)
    with np.errstate(divide='ignore'):
        log_side = np.where(live, 0.5 * mass ** 2 * np.log(np.where(live, b / np.where(live, a, 1.0), 1.0)), 0.0)
    return phi_side, log_side


def potential_profile(kind, mu, eval_points, options=WolffOptions(), phi=None, psi=None):
    """Rows (coordinates..., value) for CSV export."""
    rows = []
    for point in np.asarray(eval_points, dtype=float):
        value = wolff_potential(kind, mu, point, options, phi=phi, psi=psi).value
        rows.append((*point.tolist(), value))
    return rows
