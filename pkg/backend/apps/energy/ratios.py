"""
Energy against Wolff energy, measured as ratios on atomic measures.

Every comparison uses punctured Wolff quantities: an atom never contributes
to the ball masses seen from its own location, which keeps both sides finite.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import HypothesisError
from apps.metric.psi import compute_psi
from apps.transform.operators import KernelSpec, max_breakpoint_norm, truncated_energy
from apps.wolff.potentials import WolffKind, WolffOptions, wolff_energy, wolff_s_metric

logger = logging.getLogger(__name__)

PSI_GRID = 4096
QUANTILES = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)


def lower_ratio_reference(s):
    """
    c(s) = (1 - 2**(s-1)) / (12 * 2**s): a third from the triple-sum
    symmetrization, (1 - 2**(s-1)) / 4 from the triangle lower bound and
    2**-s from one doubling step.
    """
    if not 0 < s < 1:
        raise HypothesisError(f"The reference constant needs s in (0, 1); got {s:g}.")
    return (1.0 - 2.0 ** (s - 1.0)) / (12.0 * 2.0 ** s)


@dataclass(frozen=True)
class RatioRecord:
    instance_id: int
    energy: float
    wolff: float
    ratio: float
    phi: str
    s: float
    n_atoms: int
    eps: float = 0.0
    reference: float = math.nan

    @property
    def anomalous(self):
        return self.wolff == 0 and self.energy > 0

    @property
    def violation(self):
        """Only lower-ratio records carry a reference to violate."""
        return not math.isnan(self.reference) and self.ratio < self.reference

    def as_row(self):
        return (self.instance_id, self.n_atoms, self.s, self.phi, self.energy, self.wolff, self.ratio)


def _ratio(energy, wolff, instance_id):
    if wolff == 0:
        if energy > 0:
            logger.warning("instance %s: zero Wolff energy with energy %.6g", instance_id, energy)
            return math.inf
        return 0.0
    return energy / wolff


def _default_eps(mu):
    sep = mu.min_separation()
    return 0.5 * sep if math.isfinite(sep) else 1.0


def energy_upper_ratio(mu, phi, q=None, eps=None, instance_id=0):
    """
    int_Q |R_eps chi_Q|**2 d mu over the punctured Wolff energy of mu|Q with
    the same truncation floor. ``eps`` defaults to half the smallest separation in Q.
    """
    restricted = mu if q is None else mu.restrict(q)
    eps = _default_eps(restricted) if eps is None else eps
    kernel = KernelSpec(phi, restricted.dimension)
    energy = truncated_energy(kernel, restricted, eps)
    wolff = wolff_energy(restricted, WolffKind.PHI, options=WolffOptions(puncture=True, eps_floor=eps), phi=phi)
    return RatioRecord(
        instance_id=instance_id,
        energy=energy,
        wolff=wolff,
        ratio=_ratio(energy, wolff, instance_id),
        phi=str(phi),
        s=phi.s_doubling,
        n_atoms=len(restricted),
        eps=eps,
    )


def energy_lower_ratio(mu, phi, instance_id=0):
    """
    Energy in the eps -> 0 limit over the punctured Wolff energy, with the
    reference constant c(s) attached. Needs concave phi with s in (0, 1).
    """
    s = phi.s_doubling
    if not phi.is_concave or not 0 < s < 1:
        raise HypothesisError(
            f"The lower comparison needs a concave function with s in (0, 1); got {phi}."
        )
    eps = _default_eps(mu)
    kernel = KernelSpec(phi, mu.dimension)
    energy = truncated_energy(kernel, mu, eps)
    wolff = wolff_energy(mu, WolffKind.PHI, options=WolffOptions(puncture=True), phi=phi)
    record = RatioRecord(
        instance_id=instance_id,
        energy=energy,
        wolff=wolff,
        ratio=_ratio(energy, wolff, instance_id),
        phi=str(phi),
        s=s,
        n_atoms=len(mu),
        eps=eps,
        reference=lower_ratio_reference(s),
    )
    if len(mu) > 1 and record.violation:
        logger.warning("instance %s: lower ratio %.6g below reference %.6g",
                       instance_id, record.ratio, record.reference)
    return record


@dataclass(frozen=True)
class NormWolffReport:
    norm_squared: float
    wolff_sup: float
    wolff_mean: float
    total_mass: float

    @property
    def upper_ratio(self):
        """||R||**2 / sup W_s."""
        return self.norm_squared / self.wolff_sup if self.wolff_sup > 0 else 0.0

    @property
    def lower_ratio(self):
        """||R||**2 / (int W_phi d mu / ||mu||)."""
        return self.norm_squared / self.wolff_mean if self.wolff_mean > 0 else 0.0


def norm_vs_wolff_sup(mu, phi, psi=None, **power_options):
    """
    Largest breakpoint operator norm squared against the sup over atoms of the
    punctured W_s in the induced metric and the mean punctured W_phi.
    """
    if len(mu) < 2:
        return NormWolffReport(0.0, 0.0, 0.0, mu.total_mass)
    if psi is None:
        psi = compute_psi(phi, mu.diameter(), PSI_GRID)
    kernel = KernelSpec(phi, mu.dimension)
    norm = max_breakpoint_norm(kernel, mu, **power_options)
    s = phi.s_doubling
    sup = max(wolff_s_metric(mu, psi, s, x, puncture=True).value for x in mu.points)
    total = mu.total_mass
    mean = wolff_energy(mu, WolffKind.PHI, options=WolffOptions(puncture=True), phi=phi) / total
    return NormWolffReport(norm_squared=norm * norm, wolff_sup=sup, wolff_mean=mean, total_mass=total)


def mass_scaling_pair(mu, phi, factor, q=None):
    """Upper ratios of mu and factor * mu; equal since both sides scale by factor**3."""
    return (
        energy_upper_ratio(mu, phi, q).ratio,
        energy_upper_ratio(mu.scaled(factor), phi, q).ratio,
    )


def dilation_pair(mu, phi, factor):
    """Upper ratios of mu and its dilation; equal for power functions only."""
    if phi.family != 'power':
        raise HypothesisError("Dilation invariance only holds for power functions.")
    return (
        energy_upper_ratio(mu, phi).ratio,
        energy_upper_ratio(mu.dilated(factor), phi).ratio,
    )


@dataclass(frozen=True, eq=False)
class RatioCorpusSummary:
    count: int
    quantiles: dict
    spread: float
    anomalies: int
    violations: int
    min_margin: float

    @property
    def passed(self):
        return self.anomalies == 0 and self.violations == 0


def ratio_corpus(records):
    """Quantiles, spread (max / min positive ratio), anomalies and reference violations."""
    ratios = np.array([r.ratio for r in records if r.n_atoms > 1 and math.isfinite(r.ratio)])
    if ratios.size == 0:
        return RatioCorpusSummary(0, {}, math.nan, 0, 0, math.nan)
    quantiles = {f'q{int(round(100 * q)):02d}': float(v) for q, v in zip(QUANTILES, np.quantile(ratios, QUANTILES))}
    positive = ratios[ratios > 0]
    spread = float(positive.max() / positive.min()) if positive.size else math.nan
    margins = [r.ratio - r.reference for r in records if not math.isnan(r.reference) and r.n_atoms > 1]
    return RatioCorpusSummary(
        count=int(ratios.size),
        quantiles=quantiles,
        spread=spread,
        anomalies=sum(1 for r in records if r.anomalous),
        violations=sum(1 for r in records if r.n_atoms > 1 and r.violation),
        min_margin=float(min(margins)) if margins else math.nan,
    )
