"""
Per-instance corpus tasks.

Every task is a module-level function of one picklable argument so it can
run in a ProcessPoolExecutor. Results come back in task order and are
written by the parent only.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import HypothesisError
from apps.curvature.triangles import symmetrize_energy
from apps.energy.ratios import NormWolffReport, energy_lower_ratio, energy_upper_ratio, norm_vs_wolff_sup
from apps.measure.generators import random_measure
from apps.measure.measures import rescale_to_sigma
from apps.transform.operators import (
    KernelSpec,
    MaximalExcessReport,
    maximal_excess,
    quadratic_form,
    truncated_energy,
)
from apps.wolff.potentials import (
    WolffKind,
    WolffOptions,
    phi_zero_log_identity,
    quadrature_potential,
    wolff_potential,
)

logger = logging.getLogger(__name__)

SYMMETRIZATION_MAX_ATOMS = 25
NORM_GRID = 8


def map_instances(func, tasks, threads=1):
    """func over tasks, in order; a process pool when threads > 1."""
    tasks = list(tasks)
    if threads <= 1 or len(tasks) < 2:
        return [func(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks, chunksize=chunksize))


@dataclass(frozen=True)
class MeasureTask:
    instance_id: int
    seed: np.random.SeedSequence
    n_atoms: int
    d: int
    phi: object


def energy_instance(task):
    """
    Upper and (where defined) lower energy ratios of one random measure, and
    the symmetrization cross-check for small measures.
    """
    rng = np.random.default_rng(task.seed)
    mu = random_measure(rng, task.n_atoms, task.d)
    upper = energy_upper_ratio(mu, task.phi, instance_id=task.instance_id)
    try:
        lower = energy_lower_ratio(mu, task.phi, instance_id=task.instance_id)
    except HypothesisError:
        lower = None
    symmetrization_error = math.nan
    if task.n_atoms <= SYMMETRIZATION_MAX_ATOMS:
        symmetrization_error = symmetrization_gap(mu, task.phi, upper.eps)
    return task, upper, lower, symmetrization_error


def symmetrization_gap(mu, phi, eps):
    """Relative gap between the pair/triple decomposition and the direct energy."""
    kernel = KernelSpec(phi, mu.dimension)
    direct = truncated_energy(kernel, mu, eps)
    split = symmetrize_energy(kernel, mu, eps).total
    if direct == 0:
        return abs(split)
    return abs(split - direct) / direct


def symmetrization_instance(task):
    rng = np.random.default_rng(task.seed)
    mu = random_measure(rng, task.n_atoms, task.d)
    return task, symmetrization_gap(mu, task.phi, 0.5 * mu.min_separation())


def quadratic_form_instance(task):
    """
    |<R_eps chi_Q, chi_Q>| relative to sum_{i != j in Q} m_i m_j / phi(|x_i - x_j|)
    for a random subset Q and a random eps below the diameter.
    """
    rng = np.random.default_rng(task.seed)
    mu = random_measure(rng, task.n_atoms, task.d)
    size = int(rng.integers(2, len(mu) + 1))
    q = np.sort(rng.choice(len(mu), size=size, replace=False))
    eps = float(rng.uniform(0.0, mu.diameter()))
    kernel = KernelSpec(task.phi, mu.dimension)
    form = quadratic_form(kernel, mu, q, eps)
    sub = mu.restrict(q)
    dist = sub.pairwise_distances()
    off = ~np.eye(len(sub), dtype=bool)
    weights = np.outer(sub.masses, sub.masses)[off] / task.phi.evaluate(dist[off])
    scale = math.fsum(weights)
    return task, float(np.linalg.norm(form)) / scale if scale > 0 else 0.0


@dataclass(frozen=True)
class PotentialTask:
    instance_id: int
    seed: np.random.SeedSequence
    kind: WolffKind
    phi: object = None
    psi: object = None


def potential_instance(task, max_atoms=8):
    """Closed-form potential against quadrature at a random point off the atoms."""
    rng = np.random.default_rng(task.seed)
    d = int(rng.integers(1, 4))
    mu = random_measure(rng, int(rng.integers(1, max_atoms + 1)), d)
    x = rng.uniform(0.0, 1.0, size=d)
    options = WolffOptions(puncture=False)
    closed = wolff_potential(task.kind, mu, x, options, phi=task.phi, psi=task.psi).value
    quad = quadrature_potential(task.kind, mu, x, options, phi=task.phi, psi=task.psi).value
    scale = max(abs(closed), abs(quad))
    gap = abs(closed - quad) / scale if scale > 0 else 0.0
    return task, closed, quad, gap


def log_identity_instance(task, max_atoms=8):
    """Largest segment-wise gap of the phi_0 potential against its log form."""
    rng = np.random.default_rng(task.seed)
    d = int(rng.integers(1, 4))
    mu = random_measure(rng, int(rng.integers(1, max_atoms + 1)), d)
    # keep the atoms inside the logarithmic branch around x
    mu = mu.dilated(0.1)
    x = mu.points[int(rng.integers(len(mu)))]
    phi_side, log_side = phi_zero_log_identity(mu, task.phi, x)
    if phi_side.size == 0:
        return task, 0.0
    scale = max(1.0, float(np.abs(log_side).max()))
    return task, float(np.abs(phi_side - log_side).max()) / scale


@dataclass(frozen=True)
class NormTask:
    instance_id: int
    seed: np.random.SeedSequence
    n_atoms: int
    d: int
    phi: object
    power_options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NormOutcome:
    h: float
    wolff: NormWolffReport
    maximal: MaximalExcessReport
    kappa: float
    uniform_bound: float


def norm_instance(task, n_per_axis=NORM_GRID):
    """
    For one random measure, resolved at its own atom separation h: the
    breakpoint operator norm against the Wolff supremum, the maximal
    transform against its off-support surrogate and the uniform truncation
    bound of kappa mu, the measure rescaled into the growth class.
    """
    rng = np.random.default_rng(task.seed)
    mu = random_measure(rng, task.n_atoms, task.d)
    h = mu.min_separation()
    report = norm_vs_wolff_sup(mu, task.phi, **task.power_options)
    excess = maximal_excess(KernelSpec(task.phi, task.d), mu, h, n_per_axis)
    _, kappa = rescale_to_sigma(mu, task.phi, h)
    # every breakpoint norm is linear in the masses
    uniform = kappa * math.sqrt(report.norm_squared)
    return task, NormOutcome(h, report, excess, kappa, uniform)
