"""
Experiment drivers.

Each driver takes an ExperimentContext and returns a RunResult: CSV tables,
a JSON-ready summary and the list of hard failures. Numbers that carry a
method tag or a resolution h keep them in the same row.
"""
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from apps.capacity.estimators import (
    CapacityMethod,
    bessel_comparison,
    bessel_surrogate,
    capacity_vs_wolff,
    gamma_op_estimate,
    gamma_phi_plus_lower,
    gamma_star_estimate,
    refinement_study,
    riesz_functional,
    wolff_capacity_functional,
)
from apps.capacity.serializers import CapacityEstimateSerializer
from apps.capacity.simplex import LinearProgram, enumerate_vertices, lp_solve
from apps.core.arrays import geometric_grid
from apps.core.exceptions import GrowthConditionError, UnboundedLPError
from apps.curvature.serializers import TriangleCorpusSummarySerializer
from apps.curvature.triangles import (
    decomposition_rows,
    equilateral_triangle,
    p_phi,
    symmetrize_energy,
    triangle_corpus,
)
from apps.energy.ratios import ratio_corpus
from apps.energy.serializers import RatioCorpusSummarySerializer
from apps.measure.generators import (
    off_support_grid,
    random_cloud,
    random_measure,
    thin_to_separation,
    uniform_measure,
)
from apps.measure.measures import AtomicMeasure, growth_centers
from apps.metric.calderon import ball_correspondence_check, verify_cz_kernel
from apps.metric.psi import check_metric_axioms, check_sandwich, compute_psi, identity_gap
from apps.phi.functions import PhiZero, PowerPhi, validate_phi, verify_growth_integral
from apps.phi.serializers import ValidationReportSerializer
from apps.transform.operators import KernelSpec, limit_transform, transform_rows, truncated_energy
from apps.wolff.potentials import WolffKind

from .serializers import EXPERIMENTS, CriterionResultSerializer
from .workers import (
    MeasureTask,
    NormTask,
    PotentialTask,
    energy_instance,
    log_identity_instance,
    map_instances,
    norm_instance,
    potential_instance,
    quadratic_form_instance,
    symmetrization_instance,
)

logger = logging.getLogger(__name__)

DEFAULT_R_GRID = geometric_grid(2.0 ** -20, 1.0, 41)
DEFAULT_SIZES = (5, 10, 20, 50, 100, 200)
DEFAULT_COUNTS = (8, 16, 32, 64)

POWER_IDENTITY_TOL = 1e-12
EQUILATERAL_TOL = 1e-12
SYMMETRIZATION_TOL = 1e-10
QUADRATURE_TOL = 1e-8
LOG_IDENTITY_TOL = 1e-12
QUADRATIC_FORM_TOL = 1e-12
LP_TOL = 1e-10
SCALING_TOL = 1e-9
UPPER_SPREAD_LIMIT = 20.0
MAXIMAL_TOL = 1e-12
NORM_INSTANCES = 2
NORM_MAX_ATOMS = 50
DECOMPOSITION_ATOMS = 12

# acceptance corpus sizes
SYMMETRIZATION_INSTANCES = 200
TRIANGLES_PER_PHI = 10 ** 6
TRIANGLE_EXPONENTS = (0.3, 0.5, 0.9)
POTENTIAL_INSTANCES = 100
CZ_SAMPLES = 10 ** 5
AXIOM_SAMPLES = 10 ** 4
RATIO_INSTANCES = 10
ACCEPTANCE_NORM_SIZES = (5, 10, 20)
QUADRATIC_FORM_INSTANCES = 500
CAPACITY_INSTANCES = 100
CAPACITY_RESOLUTION = 0.05
CAPACITY_GRID = 8
RANDOM_LPS = 50


def default_families():
    return (PowerPhi(0.3), PowerPhi(0.7), PhiZero())


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)


@dataclass
class RunResult:
    experiment: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    methods: set = field(default_factory=set)
    digests: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def table(self, name, header):
        return self.tables.setdefault(name, Table(tuple(header)))

    def fail(self, message):
        logger.error("%s: %s", self.experiment, message)
        self.failures.append(message)

    @property
    def passed(self):
        return not self.failures


@dataclass(frozen=True)
class ExperimentContext:
    config: object
    seed: int
    threads: int = 1
    power_tol: float = 1e-10
    power_max_iter: int = 100000
    lp_max_pivots: int = 50000

    @property
    def stream(self):
        return EXPERIMENTS.index(self.config.experiment)

    @property
    def power_options(self):
        return {'tol': self.power_tol, 'max_iter': self.power_max_iter}

    def sequence(self, *key):
        """The seed sequence of one named random stream; identical across runs."""
        return np.random.SeedSequence(self.seed, spawn_key=(self.stream, *key))

    def rng(self, *key):
        return np.random.default_rng(self.sequence(*key))

    def seeds(self, count, *key):
        return self.sequence(*key).spawn(count)

    def seed_value(self, *key):
        return int(self.sequence(*key).generate_state(1)[0])


def _families(config):
    return config.phis or default_families()


def _point_sets(ctx):
    """Candidate sets from the configured generator, thinned to separation h."""
    generator = ctx.config.generator
    count = ctx.config.instances if generator.validated_data['kind'] == 'random' else 1
    sets = []
    for i in range(count):
        points = generator.build_points(ctx.rng(0, i))
        sets.append(thin_to_separation(points, ctx.config.h))
    return sets


def run_verify_phi(ctx):
    config = ctx.config
    result = RunResult('verify-phi')
    grid = geometric_grid(config.grid['min'], config.grid['max'], config.grid['points'])
    r_grid = np.asarray(config.r_grid) if config.r_grid else DEFAULT_R_GRID
    checks = result.table('properties', ('phi', 'check', 'passed', 'worst_t', 'worst_value'))
    lambdas = result.table('lambda', ('phi', 'd', 'r', 'ratio', 'converged'))
    functions = {}
    for phi in config.phis:
        report = validate_phi(phi, grid)
        for name, check in report.checks.items():
            checks.rows.append((str(phi), name, check.passed, check.worst_t, check.worst_value))
        if not report.passed:
            failed = [name for name, check in report.checks.items() if not check.passed]
            result.fail(f"{phi}: property checks {', '.join(failed)} fail on the grid")
        entry = dict(ValidationReportSerializer(report).data)
        entry['lambda'] = {}
        for d in config.dimensions:
            try:
                estimate = verify_growth_integral(phi, d, r_grid)
            except GrowthConditionError as exc:
                result.fail(f"{phi}, d={d}: {exc}")
                entry['lambda'][str(d)] = None
                continue
            for r, ratio, ok in zip(estimate.r_grid, estimate.ratios, estimate.converged):
                lambdas.rows.append((str(phi), d, float(r), float(ratio), bool(ok)))
            entry['lambda'][str(d)] = {
                'value': estimate.value,
                'bound': estimate.bound,
                'passed': estimate.passed,
            }
            if not estimate.passed:
                result.fail(f"{phi}, d={d}: growth integral does not settle (Lambda ~ {estimate.value:.6g})")
        functions[str(phi)] = entry
    result.summary['functions'] = functions
    return result


def run_metric(ctx):
    config = ctx.config
    result = RunResult('metric')
    nodes = result.table('psi', ('phi', 'r', 'psi', 'root'))
    checks = result.table('checks', ('phi', 'sandwich_below', 'sandwich_above', 'identity_gap',
                                     'axiom_violations', 'ball_mismatches', 'forward_ratio',
                                     'converse_ratio'))
    for i, phi in enumerate(config.phis):
        psi = compute_psi(phi, config.psi['r_max'], config.psi['n_grid'])
        for r, value in psi.to_rows():
            nodes.rows.append((str(phi), r, value, float(phi.root(r))))
        sandwich = check_sandwich(psi)
        if not sandwich.passed:
            result.fail(f"{phi}: {sandwich.below} nodes below and {sandwich.above} above the sandwich")
        gap = identity_gap(psi) if phi.family == 'power' else math.nan
        if gap > POWER_IDENTITY_TOL:
            result.fail(f"{phi}: psi differs from r by {gap:.3e}")
        violations = check_metric_axioms(psi, ctx.rng(1, i), config.samples)
        if violations:
            result.fail(f"{phi}: {violations} sampled triples violate the metric axioms")
        rng = ctx.rng(2, i)
        if config.generator is not None:
            mu = uniform_measure(config.generator.build_points(rng))
        else:
            mu = random_measure(rng, 32, 2)
        balls = ball_correspondence_check(phi, psi, mu)
        if not balls.passed:
            result.fail(f"{phi}: ball correspondence fails ({balls.mismatches} mismatches)")
        checks.rows.append((str(phi), sandwich.below, sandwich.above, gap, violations,
                            balls.mismatches, balls.forward_ratio, balls.converse_ratio))
    return result


def run_cz_check(ctx):
    config = ctx.config
    result = RunResult('cz-check')
    rows = result.table('constants', ('phi', 's', 'samples', 'size_max', 'smooth_max', 'candidate_A', 'passed'))
    witnesses = {}
    for i, phi in enumerate(config.phis):
        psi = compute_psi(phi, config.psi['r_max'], config.psi['n_grid'])
        constants, report = verify_cz_kernel(phi, psi, config.samples, ctx.seed_value(i))
        rows.rows.append((str(phi), constants.s, report.samples, report.size_max, report.smooth_max,
                          report.candidate_A, report.passed))
        witnesses[str(phi)] = {'size': report.size_witness, 'smoothness': report.smooth_witness}
        if not report.size_passed:
            result.fail(f"{phi}: size ratio {report.size_max:.17g} exceeds 1")
        if not report.smooth_passed:
            result.fail(f"{phi}: smoothness ratio {report.smooth_max:.6g} exceeds {report.candidate_A:.6g}")
    result.summary['witnesses'] = witnesses
    return result


def _energy_tasks(ctx, phis, sizes, dimensions, instances, *key):
    tasks = []
    for p, phi in enumerate(phis):
        for n in sizes:
            for d in dimensions:
                for seed in ctx.seeds(instances, *key, p, n, d):
                    tasks.append(MeasureTask(len(tasks), seed, n, d, phi))
    return tasks


def _max_upper_by_size(records):
    best = {}
    for record in records:
        if record.n_atoms > 1:
            best[record.n_atoms] = max(best.get(record.n_atoms, 0.0), record.ratio)
    return best


def upper_spread(records):
    """Spread (max / min) over N of the largest upper ratio at each size N."""
    best = _max_upper_by_size(records)
    values = [v for v in best.values() if v > 0]
    if not values or not all(math.isfinite(v) for v in values):
        return math.inf
    return max(values) / min(values)


def _energy_corpus(ctx, result, tasks):
    """Run the energy tasks, fill the ratio table and return per-function summaries."""
    table = result.table('ratios', ('instance_id', 'phi', 's', 'n_atoms', 'd', 'eps', 'energy', 'wolff',
                                    'upper_ratio', 'lower_ratio', 'reference', 'symmetrization_gap'))
    by_phi = {}
    for task, upper, lower, gap in map_instances(energy_instance, tasks, ctx.threads):
        table.rows.append((
            task.instance_id, upper.phi, upper.s, task.n_atoms, task.d, upper.eps, upper.energy,
            upper.wolff, upper.ratio, lower.ratio if lower else math.nan,
            lower.reference if lower else math.nan, gap,
        ))
        entry = by_phi.setdefault(upper.phi, {'upper': [], 'lower': [], 'gaps': []})
        entry['upper'].append(upper)
        if lower is not None:
            entry['lower'].append(lower)
        if not math.isnan(gap):
            entry['gaps'].append(gap)
    summaries = {}
    for phi, entry in by_phi.items():
        summaries[phi] = {
            'upper': dict(RatioCorpusSummarySerializer(ratio_corpus(entry['upper'])).data),
            'lower': dict(RatioCorpusSummarySerializer(ratio_corpus(entry['lower'])).data) if entry['lower'] else None,
            'upper_spread': upper_spread(entry['upper']),
            'max_upper_by_size': {str(n): v for n, v in sorted(_max_upper_by_size(entry['upper']).items())},
            'max_symmetrization_gap': max(entry['gaps'], default=0.0),
            'lower_violations': sum(1 for r in entry['lower'] if r.n_atoms > 1 and r.violation),
            'anomalies': sum(1 for r in entry['upper'] if r.anomalous),
        }
    return summaries


def _energy_failures(summaries, result):
    for phi, summary in summaries.items():
        if not summary['upper_spread'] <= UPPER_SPREAD_LIMIT:
            result.fail(f"{phi}: upper ratio spread {summary['upper_spread']:.4g} exceeds {UPPER_SPREAD_LIMIT:g}")
        if summary['lower_violations']:
            result.fail(f"{phi}: {summary['lower_violations']} lower ratios below the reference constant")
        if summary['anomalies']:
            result.fail(f"{phi}: {summary['anomalies']} instances with zero Wolff energy and positive energy")
        if summary['max_symmetrization_gap'] > SYMMETRIZATION_TOL:
            result.fail(f"{phi}: symmetrization gap {summary['max_symmetrization_gap']:.3e}")


def _norm_tasks(ctx, phis, sizes, dimensions, instances, *key):
    tasks = []
    for p, phi in enumerate(phis):
        for n in sizes:
            if not 2 <= n <= NORM_MAX_ATOMS:
                continue
            for d in dimensions:
                for seed in ctx.seeds(instances, *key, p, n, d):
                    tasks.append(NormTask(len(tasks), seed, n, d, phi, ctx.power_options))
    return tasks


def _growth(values):
    """max / min of positive values; inf when the smallest is 0."""
    values = list(values)
    return max(values) / min(values) if min(values) > 0 else math.inf


def _norm_corpus(ctx, result, tasks):
    """
    Run the norm tasks and fill three tables: operator norm against the Wolff
    supremum per instance, the maximal transform excess per instance and the
    largest uniform truncation bound of kappa mu at each size N.
    """
    norms = result.table('norms', ('instance_id', 'phi', 'n_atoms', 'd', 'h', 'norm_squared', 'wolff_sup',
                                   'wolff_mean', 'upper_ratio', 'lower_ratio', 'kappa', 'uniform_bound'))
    maximal = result.table('maximal', ('instance_id', 'phi', 'n_atoms', 'd', 'h', 'eval_count', 'maximal',
                                       'surrogate', 'excess'))
    by_phi = {}
    for task, outcome in map_instances(norm_instance, tasks, ctx.threads):
        phi, report, excess = str(task.phi), outcome.wolff, outcome.maximal
        norms.rows.append((task.instance_id, phi, task.n_atoms, task.d, outcome.h, report.norm_squared,
                           report.wolff_sup, report.wolff_mean, report.upper_ratio, report.lower_ratio,
                           outcome.kappa, outcome.uniform_bound))
        maximal.rows.append((task.instance_id, phi, task.n_atoms, task.d, outcome.h, excess.eval_count,
                             excess.maximal, excess.surrogate, excess.excess))
        if excess.excess < -MAXIMAL_TOL * max(1.0, excess.surrogate):
            result.fail(f"instance {task.instance_id}, {phi}: maximal transform {excess.maximal:.17g} "
                        f"below its surrogate {excess.surrogate:.17g}")
        by_size = by_phi.setdefault(phi, {}).setdefault(task.n_atoms, [])
        by_size.append(outcome)

    growth = result.table('uniform_bound', ('phi', 'n_atoms', 'instances', 'max_uniform_bound',
                                            'max_upper_ratio', 'min_lower_ratio', 'max_excess'))
    summaries = {}
    for phi, sizes in by_phi.items():
        bounds = {}
        for n, outcomes in sorted(sizes.items()):
            bounds[n] = max(o.uniform_bound for o in outcomes)
            growth.rows.append((
                phi, n, len(outcomes), bounds[n],
                max(o.wolff.upper_ratio for o in outcomes),
                min(o.wolff.lower_ratio for o in outcomes),
                max(o.maximal.excess for o in outcomes),
            ))
        summaries[phi] = {
            'uniform_bound_by_size': {str(n): v for n, v in bounds.items()},
            'uniform_bound_growth': _growth(bounds.values()),
            'max_excess': max(o.maximal.excess for outcomes in sizes.values() for o in outcomes),
        }
    return summaries


def run_energy_ratios(ctx):
    config = ctx.config
    result = RunResult('energy-ratios')
    sizes = config.sizes or DEFAULT_SIZES
    tasks = _energy_tasks(ctx, config.phis, sizes, config.dimensions, config.instances)
    logger.info("energy ratios: %d instances", len(tasks))
    summaries = _energy_corpus(ctx, result, tasks)
    _energy_failures(summaries, result)
    norm_tasks = _norm_tasks(ctx, config.phis, sizes, config.dimensions, min(config.instances, NORM_INSTANCES), 1)
    logger.info("operator norms: %d instances", len(norm_tasks))
    for phi, norms in _norm_corpus(ctx, result, norm_tasks).items():
        summaries.setdefault(phi, {})['norms'] = norms
    result.summary['functions'] = summaries
    return result


def equilateral_gap():
    """|p_phi - 3/2| for the unit equilateral triangle and phi(t) = t."""
    return abs(p_phi(equilateral_triangle(), PowerPhi(1.0)) - 1.5)


def _record_decomposition(table, phi, rng, n_atoms=DECOMPOSITION_ATOMS, d=2):
    """Pair and triple parts of the energy of one random measure next to the direct value."""
    mu = random_measure(rng, n_atoms, d)
    eps = 0.5 * mu.min_separation()
    kernel = KernelSpec(phi, d)
    split = symmetrize_energy(kernel, mu, eps)
    direct = truncated_energy(kernel, mu, eps)
    for part, value in (*decomposition_rows(split), ('direct', direct)):
        table.rows.append((str(phi), n_atoms, d, eps, part, value))
    return abs(split.total - direct) / direct if direct > 0 else abs(split.total)


def run_curvature_corpus(ctx):
    config = ctx.config
    result = RunResult('curvature-corpus')
    histogram = result.table('margins', ('phi', 'bound', 'log10_margin_low', 'log10_margin_high', 'count'))
    decomposition = result.table('decomposition', ('phi', 'n_atoms', 'd', 'eps', 'part', 'value'))
    summaries = {}
    for i, phi in enumerate(config.phis):
        summary = triangle_corpus(phi, config.samples, ctx.rng(i))
        for row in summary.histogram_rows():
            histogram.rows.append((summary.phi, *row))
        summaries[summary.phi] = dict(TriangleCorpusSummarySerializer(summary).data)
        split_gap = _record_decomposition(decomposition, phi, ctx.rng(i, 1))
        summaries[summary.phi]['symmetrization_gap'] = split_gap
        if split_gap > SYMMETRIZATION_TOL:
            result.fail(f"{phi}: pair and triple parts miss the direct energy by {split_gap:.3e}")
        if not summary.passed:
            result.fail(f"{phi}: {summary.upper_violations} upper and {summary.lower_violations} "
                        f"lower bound violations")
    gap = equilateral_gap()
    if gap > EQUILATERAL_TOL:
        result.fail(f"equilateral triangle: p_phi off 3/2 by {gap:.3e}")
    result.summary['functions'] = summaries
    result.summary['equilateral_gap'] = gap
    return result


def _record_estimate(result, estimates, masses, instance_id, phi, points, estimate):
    method = CapacityMethod(estimate.method).value
    result.methods.add(method)
    digest = estimate.digest()
    result.digests[f'{instance_id}/{phi}/{method}'] = digest
    estimates.rows.append((instance_id, str(phi), method, estimate.h, points.shape[0], estimate.value,
                           ' '.join(estimate.flags), digest))
    for atom, (point, mass) in enumerate(zip(points.tolist(), estimate.masses.tolist())):
        masses.rows.append((instance_id, str(phi), method, estimate.h, atom, *point, mass))


def _record_transform(table, instance_id, phi, points, estimate):
    """R 1 of the LP-optimal measure at the off-support grid and at the candidates."""
    keep = estimate.masses > 0
    if not keep.any():
        return
    mu = AtomicMeasure(points[keep], estimate.masses[keep])
    eval_points = np.vstack([off_support_grid(points, estimate.h), points])
    values = limit_transform(KernelSpec(phi, points.shape[1]), mu, eval_points)
    for row in transform_rows(eval_points, values):
        table.rows.append((instance_id, str(phi), estimate.h, *row))


def run_capacity(ctx):
    config = ctx.config
    result = RunResult('capacity')
    point_sets = _point_sets(ctx)
    d = point_sets[0].shape[1]
    estimates = result.table('estimates', ('instance_id', 'phi', 'method', 'h', 'n_atoms', 'value',
                                           'flags', 'digest'))
    masses = result.table('masses', ('instance_id', 'phi', 'method', 'h', 'atom',
                                     *(f'x{k}' for k in range(d)), 'mass'))
    transform = result.table('transform', ('instance_id', 'phi', 'h', *(f'x{k}' for k in range(d)),
                                           *(f'r{k}' for k in range(d)), 'norm'))
    details = []
    lp_options = {'max_pivots': ctx.lp_max_pivots}
    for instance_id, points in enumerate(point_sets):
        bessel = bessel_surrogate(points, config.h)
        _record_estimate(result, estimates, masses, instance_id, '-', points, bessel)
        for phi in config.phis:
            plus = gamma_phi_plus_lower(points, phi, config.h, **lp_options)
            _record_transform(transform, instance_id, phi, points, plus)
            star = gamma_star_estimate(points, phi, config.h, **lp_options)
            op = gamma_op_estimate(points, phi, config.h, profile=star.masses, power_options=ctx.power_options)
            found = [plus, star, op, wolff_capacity_functional(points, phi, config.h)]
            if phi.family == 'power':
                found.append(riesz_functional(points, phi, config.h))
            for estimate in found:
                _record_estimate(result, estimates, masses, instance_id, phi, points, estimate)
                details.append({
                    'instance_id': instance_id,
                    'phi': str(phi),
                    **CapacityEstimateSerializer(estimate).data,
                })
            if star.value > plus.value * (1.0 + LP_TOL) + LP_TOL:
                result.fail(f"instance {instance_id}, {phi}: gamma_star {star.value:.17g} "
                            f"exceeds gamma_plus {plus.value:.17g}")
    result.summary['estimates'] = details
    return result


def run_capacity_vs_wolff(ctx):
    config = ctx.config
    result = RunResult('capacity-vs-wolff')
    point_sets = _point_sets(ctx)
    table = result.table('comparison', ('instance_id', 'phi', 'h', 'n_atoms', 'lp_gamma_plus',
                                        'wolff_functional', 'ratio'))
    reports = {}
    for phi in config.phis:
        report = capacity_vs_wolff(point_sets, phi, config.h, max_pivots=ctx.lp_max_pivots)
        for row in report.rows:
            table.rows.append((row.instance_id, str(phi), config.h, row.n_atoms, row.first, row.second, row.ratio))
        # the sandwich constants are not explicit, so a wide spread is reported rather than failed
        reports[str(phi)] = {
            'lower': report.lower,
            'upper': report.upper,
            'spread': report.spread,
            'within_limit': report.passed,
        }
    result.methods.update({CapacityMethod.LP_GAMMA_PLUS.value, CapacityMethod.WOLFF_FUNCTIONAL.value})
    result.summary['functions'] = reports
    return result


def run_bessel_comparison(ctx):
    config = ctx.config
    result = RunResult('corollary22')
    phi = config.phi or PhiZero()
    r_grid = np.asarray(config.r_grid) if config.r_grid else None
    report = bessel_comparison(r_grid, d=config.dimensions[0], n_atoms=config.n_atoms, phi=phi, h=config.h,
                               max_pivots=ctx.lp_max_pivots)
    table = result.table('trend', ('r', 'log_inv_r', 'h', 'lp_gamma_plus', 'bessel_surrogate', 'ratio'))
    table.rows.extend(report.rows)
    result.methods.update({CapacityMethod.LP_GAMMA_PLUS.value, CapacityMethod.BESSEL_SURROGATE.value})
    result.summary.update({
        'phi': str(phi),
        'spread': report.spread,
        'slope_plus': report.slope_plus,
        'slope_bessel': report.slope_bessel,
        'passed': report.passed,
    })
    if not report.passed:
        result.fail(f"trend check fails: spread {report.spread:.4g}, slopes "
                    f"{report.slope_plus:.4g} / {report.slope_bessel:.4g}")
    return result


def run_refinement(ctx):
    config = ctx.config
    result = RunResult('refinement')
    radius = config.generator.validated_data['radius'] if config.generator is not None else 1.0
    table = result.table('refinement', ('phi', 'n_atoms', 'h', 'method', 'value'))
    for phi in config.phis:
        rows = refinement_study(radius, phi, config.sizes or DEFAULT_COUNTS, d=config.dimensions[0],
                                max_pivots=ctx.lp_max_pivots)
        for n, h, plus, star in rows:
            table.rows.append((str(phi), n, h, CapacityMethod.LP_GAMMA_PLUS.value, plus))
            table.rows.append((str(phi), n, h, CapacityMethod.MAXIMAL_STAR.value, star))
            if star > plus * (1.0 + LP_TOL) + LP_TOL:
                result.fail(f"{phi}, N={n}: gamma_star exceeds gamma_plus")
    result.methods.update({CapacityMethod.LP_GAMMA_PLUS.value, CapacityMethod.MAXIMAL_STAR.value})
    return result


@dataclass(frozen=True)
class CriterionResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float


def criterion_symmetrization(ctx, phis):
    rng = ctx.rng(1)
    tasks = [
        MeasureTask(i, seed, int(rng.integers(3, 26)), int(rng.integers(1, 4)), phis[i % len(phis)])
        for i, seed in enumerate(ctx.seeds(SYMMETRIZATION_INSTANCES, 1))
    ]
    gaps = [gap for _, gap in map_instances(symmetrization_instance, tasks, ctx.threads)]
    worst = max(gaps)
    return worst <= SYMMETRIZATION_TOL, f"{len(gaps)} measures, max relative gap {worst:.3e}"


def criterion_sandwich(ctx, phis):
    notes, passed = [], True
    for i, phi in enumerate(phis):
        psi = compute_psi(phi, 2.0, 2048)
        sandwich = check_sandwich(psi)
        violations = check_metric_axioms(psi, ctx.rng(2, i), AXIOM_SAMPLES)
        ok = sandwich.passed and violations == 0
        if phi.family == 'power':
            gap = identity_gap(psi)
            ok = ok and gap <= POWER_IDENTITY_TOL
            notes.append(f"{phi}: identity gap {gap:.1e}")
        passed = passed and ok
        notes.append(f"{phi}: sandwich {'ok' if sandwich.passed else 'FAIL'}, axiom violations {violations}")
    return passed, '; '.join(notes)


def criterion_triangle_bounds(ctx, phis):
    notes, passed = [], True
    for i, s in enumerate(TRIANGLE_EXPONENTS):
        summary = triangle_corpus(PowerPhi(s), TRIANGLES_PER_PHI, ctx.rng(3, i))
        passed = passed and summary.passed
        notes.append(f"s={s:g}: {summary.upper_violations}/{summary.lower_violations} violations, "
                     f"min margins {summary.min_upper_margin:.2e}/{summary.min_lower_margin:.2e}")
    gap = equilateral_gap()
    notes.append(f"equilateral gap {gap:.1e}")
    return passed and gap <= EQUILATERAL_TOL, '; '.join(notes)


def criterion_wolff_closed_forms(ctx, phis):
    psi_by_phi = [compute_psi(phi, 2.0, 2048) for phi in phis]
    tasks = []
    for k, kind in enumerate(WolffKind):
        for i, seed in enumerate(ctx.seeds(POTENTIAL_INSTANCES, 4, k)):
            j = i % len(phis)
            tasks.append(PotentialTask(len(tasks), seed, kind, phis[j], psi_by_phi[j]))
    outcomes = map_instances(potential_instance, tasks, ctx.threads)
    worst = {kind.value: 0.0 for kind in WolffKind}
    for task, _, _, gap in outcomes:
        worst[task.kind.value] = max(worst[task.kind.value], gap)
    identity_tasks = [
        PotentialTask(i, seed, WolffKind.PHI, PhiZero())
        for i, seed in enumerate(ctx.seeds(POTENTIAL_INSTANCES, 4, len(WolffKind)))
    ]
    identity = max(gap for _, gap in map_instances(log_identity_instance, identity_tasks, ctx.threads))
    passed = max(worst.values()) <= QUADRATURE_TOL and identity <= LOG_IDENTITY_TOL
    detail = ', '.join(f"{kind} {gap:.2e}" for kind, gap in worst.items())
    return passed, f"max relative gaps {detail}; log identity {identity:.2e}"


def criterion_cz_constants(ctx, phis):
    notes, passed = [], True
    for i, phi in enumerate(phis):
        psi = compute_psi(phi, 2.0, 2048)
        _, report = verify_cz_kernel(phi, psi, CZ_SAMPLES, ctx.seed_value(5, i))
        passed = passed and report.passed
        notes.append(f"{phi}: size {report.size_max:.6f}, smoothness {report.smooth_max:.4g} "
                     f"<= {report.candidate_A:.4g}")
    return passed, '; '.join(notes)


def criterion_energy_ratios(ctx, phis):
    result = RunResult('acceptance')
    tasks = _energy_tasks(ctx, phis, DEFAULT_SIZES, (1, 2, 3), RATIO_INSTANCES, 6)
    summaries = _energy_corpus(ctx, result, tasks)
    _energy_failures(summaries, result)
    norms = _norm_corpus(ctx, result, _norm_tasks(ctx, phis, ACCEPTANCE_NORM_SIZES, (1, 2, 3), 1, 6, 1))
    detail = '; '.join(
        f"{phi}: spread {s['upper_spread']:.3g}, lower violations {s['lower_violations']}, uniform bound "
        + ' '.join(f"N={n}:{v:.3g}" for n, v in norms[phi]['uniform_bound_by_size'].items())
        for phi, s in summaries.items()
    )
    return result.passed, detail


def criterion_quadratic_form(ctx, phis):
    rng = ctx.rng(7)
    tasks = [
        MeasureTask(i, seed, int(rng.integers(2, 26)), int(rng.integers(1, 4)), phis[i % len(phis)])
        for i, seed in enumerate(ctx.seeds(QUADRATIC_FORM_INSTANCES, 7))
    ]
    worst = max(gap for _, gap in map_instances(quadratic_form_instance, tasks, ctx.threads))
    return worst <= QUADRATIC_FORM_TOL, f"{len(tasks)} forms, max relative size {worst:.2e}"


def _lp_not_above(first, second):
    return first <= second * (1.0 + LP_TOL) + LP_TOL


def capacity_structure_instance(rng, phi, h=CAPACITY_RESOLUTION, n_per_axis=CAPACITY_GRID, max_pivots=50000):
    """
    One random candidate set: (star <= plus, subset monotonicity, dilation
    scaling error or NaN when phi is not a power).
    """
    d = int(rng.integers(1, 3))
    points = thin_to_separation(random_cloud(rng, int(rng.integers(6, 13)), d), h)
    options = {'n_per_axis': n_per_axis, 'max_pivots': max_pivots}
    plus = gamma_phi_plus_lower(points, phi, h, **options)
    star = gamma_star_estimate(points, phi, h, **options)
    ordered = _lp_not_above(star.value, plus.value)

    subset = points[:max(1, points.shape[0] // 2)]
    shared = {
        'eval_points': np.vstack([points, off_support_grid(points, h, n_per_axis)]),
        'include_atoms': False,
        'centers': growth_centers(points),
        'max_pivots': max_pivots,
    }
    monotone = _lp_not_above(
        gamma_phi_plus_lower(subset, phi, h, **shared).value,
        gamma_phi_plus_lower(points, phi, h, **shared).value,
    )

    scaling = math.nan
    if phi.family == 'power':
        dilated = gamma_phi_plus_lower(2.0 * points, phi, 2.0 * h, **options).value
        expected = 2.0 ** phi.s_doubling * plus.value
        scaling = abs(dilated - expected) / expected if expected > 0 else abs(dilated)
    return ordered, monotone, scaling


def criterion_capacity_structure(ctx, phis):
    ordered = monotone = 0
    worst_scaling = 0.0
    for i in range(CAPACITY_INSTANCES):
        ok_order, ok_monotone, scaling = capacity_structure_instance(
            ctx.rng(8, i), phis[i % len(phis)], max_pivots=ctx.lp_max_pivots,
        )
        ordered += ok_order
        monotone += ok_monotone
        if not math.isnan(scaling):
            worst_scaling = max(worst_scaling, scaling)
    passed = ordered == monotone == CAPACITY_INSTANCES and worst_scaling <= SCALING_TOL
    return passed, (f"star <= plus on {ordered}/{CAPACITY_INSTANCES}, monotone on "
                    f"{monotone}/{CAPACITY_INSTANCES}, scaling error {worst_scaling:.2e}")


def criterion_bessel_trend(ctx, phis):
    report = bessel_comparison(d=1, n_atoms=64, phi=PhiZero(), max_pivots=ctx.lp_max_pivots)
    return report.passed, (f"spread {report.spread:.3g}, slopes {report.slope_plus:.3f} (plus) "
                           f"{report.slope_bessel:.3f} (bessel)")


def random_lp(rng, max_vars=8, max_rows=16):
    """A bounded random LP: random rows plus one all-ones row."""
    n = int(rng.integers(2, max_vars + 1))
    m = int(rng.integers(n, max_rows))
    a = np.vstack([rng.uniform(-0.5, 1.0, size=(m, n)), np.ones((1, n))])
    b = rng.uniform(0.5, 2.0, size=m + 1)
    return LinearProgram(c=rng.normal(size=n), A=a, b=b)


def criterion_lp_solver(ctx, phis):
    rng = ctx.rng(10)
    worst = 0.0
    for _ in range(RANDOM_LPS):
        lp = random_lp(rng)
        try:
            value = lp_solve(lp, max_pivots=ctx.lp_max_pivots).value
        except UnboundedLPError:
            return False, "solver reports a bounded LP as unbounded"
        brute, _ = enumerate_vertices(lp)
        worst = max(worst, abs(value - brute) / max(1.0, abs(brute)))
    return worst <= LP_TOL, f"{RANDOM_LPS} LPs, max relative gap {worst:.2e}"


CRITERIA = {
    1: ('symmetrization identity', criterion_symmetrization),
    2: ('psi sandwich and metric axioms', criterion_sandwich),
    3: ('triangle bounds', criterion_triangle_bounds),
    4: ('Wolff closed forms', criterion_wolff_closed_forms),
    5: ('Calderon-Zygmund constants', criterion_cz_constants),
    6: ('energy ratios', criterion_energy_ratios),
    7: ('quadratic form vanishing', criterion_quadratic_form),
    8: ('capacity estimator structure', criterion_capacity_structure),
    9: ('Bessel trend', criterion_bessel_trend),
    10: ('LP solver', criterion_lp_solver),
}


def run_acceptance(ctx):
    result = RunResult('acceptance')
    phis = _families(ctx.config)
    table = result.table('criteria', ('criterion', 'name', 'passed', 'detail'))
    outcomes = []
    for number in ctx.config.criteria:
        name, check = CRITERIA[number]
        logger.info("criterion %d (%s) started", number, name)
        start = time.perf_counter()
        passed, detail = check(ctx, phis)
        outcome = CriterionResult(number, name, bool(passed), detail, time.perf_counter() - start)
        logger.info("criterion %d %s in %.1fs: %s", number, 'passed' if passed else 'FAILED',
                    outcome.seconds, detail)
        table.rows.append((number, name, outcome.passed, detail))
        outcomes.append(outcome)
        if not outcome.passed:
            result.fail(f"criterion {number} ({name}): {detail}")
    result.summary['criteria'] = CriterionResultSerializer(outcomes, many=True).data
    return result


RUNNERS = {
    'verify-phi': run_verify_phi,
    'metric': run_metric,
    'cz-check': run_cz_check,
    'energy-ratios': run_energy_ratios,
    'curvature-corpus': run_curvature_corpus,
    'capacity': run_capacity,
    'capacity-vs-wolff': run_capacity_vs_wolff,
    'corollary22': run_bessel_comparison,
    'refinement': run_refinement,
    'acceptance': run_acceptance,
}


def run_experiment(ctx):
    """Run the configured experiment and time it."""
    experiment = ctx.config.experiment
    logger.info("%s started (seed %d, %d worker(s))", experiment, ctx.seed, ctx.threads)
    start = time.perf_counter()
    result = RUNNERS[experiment](ctx)
    result.wall_time = time.perf_counter() - start
    logger.info("%s finished in %.1fs with %d failure(s)", experiment, result.wall_time, len(result.failures))
    return result
