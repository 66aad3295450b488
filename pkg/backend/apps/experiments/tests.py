import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.capacity.simplex import enumerate_vertices, lp_solve
from apps.core.exceptions import ConfigError
from apps.phi.functions import PowerPhi

from .config import ExperimentConfig, ExperimentFile, flatten_errors, load_experiment_config
from .runner import (
    ExperimentContext,
    RunResult,
    Table,
    capacity_structure_instance,
    random_lp,
    run_experiment,
)
from .serializers import ACCEPTANCE_CRITERIA, ExperimentConfigSerializer, parse_family
from .workers import map_instances
from .writers import format_cell, json_safe, write_result

CURVATURE_CONFIG = """\
# small corpus
experiment = curvature-corpus
families = power:0.5,phi_zero
samples = 500
seed = 7
"""

ACCEPTANCE_CONFIG = """\
experiment = acceptance
families = power:0.5
criteria = 1
seed = 7
"""

ENERGY_CONFIG = """\
experiment = energy-ratios
families = power:0.3,power:0.7
sizes = 3,6
dimensions = 1,2
instances = 2
seed = 7
"""

CAPACITY_CONFIG = """\
experiment = capacity
phi.family = power
phi.exponent = 0.5
generator.kind = random
generator.n = 5
generator.d = 1
h = 0.05
instances = 1
seed = 7
"""


class ConfigFileMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, text, name='experiment.env'):
        path = Path(self.tmp.name) / name
        path.write_text(text, encoding='utf-8')
        return path


class ExperimentFileTests(ConfigFileMixin, SimpleTestCase):
    """Test reading configuration files"""

    def test_nested_keys_and_lists(self):
        """Test dotted keys nest and list keys are split"""
        path = self.write_config("experiment = verify-phi\nphi.family = power\nphi.exponent = 0.5\n"
                                 "dimensions = 1, 2\n")
        data = ExperimentFile(path).as_data()
        self.assertEqual(data['phi'], {'family': 'power', 'exponent': '0.5'})
        self.assertEqual(data['dimensions'], ['1', '2'])

    def test_duplicate_key(self):
        """Test a repeated key is reported with its line"""
        path = self.write_config("experiment = metric\n# comment\nexperiment = capacity\n")
        with self.assertRaises(ConfigError) as ctx:
            ExperimentFile(path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertEqual(ctx.exception.field, 'experiment')

    def test_missing_equals(self):
        """Test a line without '=' is refused"""
        path = self.write_config("experiment = metric\nfamilies\n")
        with self.assertRaises(ConfigError) as ctx:
            ExperimentFile(path)
        self.assertIn('line 2', str(ctx.exception))

    def test_value_and_group(self):
        """Test a key cannot be both a value and a group"""
        path = self.write_config("phi = power\nphi.exponent = 0.5\n")
        with self.assertRaises(ConfigError):
            ExperimentFile(path).as_data()

    def test_missing_file(self):
        """Test a missing file raises ConfigError"""
        with self.assertRaises(ConfigError):
            ExperimentFile(Path(self.tmp.name) / 'absent.env')

    def test_flatten_errors(self):
        """Test nested serializer errors become dotted names"""
        errors = {'families': {0: {'exponent': ['Required.']}}, 'non_field_errors': ['Bad.']}
        self.assertEqual(
            list(flatten_errors(errors)),
            [('families.0.exponent', 'Required.'), ('', 'Bad.')],
        )


class ExperimentConfigTests(ConfigFileMixin, SimpleTestCase):
    """Test validating configurations"""

    def test_shipped_layout(self):
        """Test a family list builds one function per entry"""
        config = load_experiment_config(self.write_config(CURVATURE_CONFIG), ExperimentConfigSerializer)
        self.assertEqual(config.experiment, 'curvature-corpus')
        self.assertEqual([phi.family for phi in config.phis], ['power', 'phi_zero'])
        self.assertEqual(config.samples, 500)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.criteria, ACCEPTANCE_CRITERIA)

    def test_malformed_family_names_field_and_line(self):
        """Test a family without its exponent is reported on the families line"""
        path = self.write_config("experiment = energy-ratios\nfamilies = power:0.3,power\n")
        with self.assertRaises(ConfigError) as ctx:
            load_experiment_config(path, ExperimentConfigSerializer)
        message = str(ctx.exception)
        self.assertIn('line 2', message)
        self.assertIn('families.1', message)

    def test_capacity_needs_generator_and_h(self):
        """Test capacity experiments refuse a missing generator"""
        path = self.write_config("experiment = capacity\nphi.family = phi_zero\nh = 0.05\n")
        with self.assertRaises(ConfigError) as ctx:
            load_experiment_config(path, ExperimentConfigSerializer)
        self.assertIn('generator', str(ctx.exception))

    def test_alias(self):
        """Test the alias resolves to the canonical experiment"""
        serializer = ExperimentConfigSerializer(data={'experiment': 'bessel-compare'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save().experiment, 'corollary22')

    def test_negative_resolution(self):
        """Test h <= 0 is refused"""
        serializer = ExperimentConfigSerializer(data={'experiment': 'metric', 'families': ['phi_zero'], 'h': -1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('h', serializer.errors)

    def test_parse_family(self):
        """Test family tokens map to function specs"""
        self.assertEqual(parse_family('power:0.3'), {'family': 'power', 'exponent': '0.3'})
        self.assertEqual(parse_family(' phi_zero:0.5'), {'family': 'phi_zero', 't_max': '0.5'})
        self.assertEqual(parse_family('phi_zero'), {'family': 'phi_zero'})


class WriterTests(SimpleTestCase):
    """Test CSV cells and JSON summaries"""

    def test_format_cell(self):
        """Test floats use 17 significant digits and booleans are lower case"""
        self.assertEqual(format_cell(0.1), '1.0000000000000001e-01')
        self.assertEqual(format_cell(np.float64(2.0)), '2.0000000000000000e+00')
        self.assertEqual(format_cell(np.True_), 'true')
        self.assertEqual(format_cell(np.int64(3)), '3')
        self.assertEqual(format_cell(None), '')
        self.assertEqual(format_cell(math.inf), 'inf')

    def test_json_safe(self):
        """Test non-finite floats and numpy values become plain JSON"""
        value = json_safe({'a': np.array([1.0, math.inf]), 'b': math.nan, 'c': {np.int64(2): -math.inf},
                           'd': {'y', 'x'}})
        self.assertEqual(value, {'a': [1.0, 'inf'], 'b': None, 'c': {'2': '-inf'}, 'd': ['x', 'y']})


class WorkerTests(SimpleTestCase):
    """Test task mapping and seed streams"""

    def test_map_instances_keeps_order(self):
        """Test results come back in task order with and without a pool"""
        tasks = [-3, 1, -2, 5]
        self.assertEqual(map_instances(abs, tasks), [3, 1, 2, 5])
        self.assertEqual(map_instances(abs, tasks, threads=2), [3, 1, 2, 5])

    def test_streams(self):
        """Test named streams repeat across contexts and differ between keys"""
        config = ExperimentConfig(experiment='metric', phis=(PowerPhi(0.5),))
        first, second = ExperimentContext(config, seed=11), ExperimentContext(config, seed=11)
        np.testing.assert_array_equal(first.rng(1, 2).uniform(size=4), second.rng(1, 2).uniform(size=4))
        self.assertNotEqual(first.seed_value(1), first.seed_value(2))
        other = ExperimentContext(ExperimentConfig(experiment='capacity', phis=()), seed=11)
        self.assertNotEqual(first.seed_value(1), other.seed_value(1))


class RunnerTests(ConfigFileMixin, SimpleTestCase):
    """Test experiment drivers"""

    def test_random_lps_match_enumeration(self):
        """Test the solver against vertex enumeration on generated programs"""
        rng = np.random.default_rng(2)
        for _ in range(10):
            lp = random_lp(rng, max_vars=4, max_rows=8)
            expected, _ = enumerate_vertices(lp)
            self.assertAlmostEqual(lp_solve(lp).value, expected, delta=1e-10 * max(1.0, abs(expected)))

    def test_capacity_structure(self):
        """Test ordering, monotonicity and dilation on one random candidate set"""
        ordered, monotone, scaling = capacity_structure_instance(np.random.default_rng(3), PowerPhi(0.5),
                                                                 n_per_axis=6)
        self.assertTrue(ordered)
        self.assertTrue(monotone)
        self.assertLessEqual(scaling, 1e-9)

    def test_run_result(self):
        """Test a failure marks the result as failed"""
        result = RunResult('metric')
        self.assertTrue(result.passed)
        result.table('rows', ('a',)).rows.append((1,))
        self.assertIsInstance(result.tables['rows'], Table)
        result.fail('broken')
        self.assertFalse(result.passed)

    def test_curvature_run_is_deterministic(self):
        """Test two runs with one seed write identical tables"""
        config = load_experiment_config(self.write_config(CURVATURE_CONFIG), ExperimentConfigSerializer)
        outputs = []
        for name in ('first', 'second'):
            ctx = ExperimentContext(config, seed=5)
            result = run_experiment(ctx)
            self.assertTrue(result.passed, result.failures)
            paths = write_result(Path(self.tmp.name) / name, result, ctx)
            outputs.append({path.name: path.read_bytes() for path in paths if path.suffix == '.csv'})
        self.assertEqual(outputs[0], outputs[1])
        self.assertIn('curvature-corpus_margins.csv', outputs[0])

    def run_twice(self, text):
        """Run one configuration twice with the same seed; the results and their CSV bytes"""
        config = load_experiment_config(self.write_config(text), ExperimentConfigSerializer)
        results, outputs = [], []
        for name in ('first', 'second'):
            ctx = ExperimentContext(config, seed=5)
            result = run_experiment(ctx)
            paths = write_result(Path(self.tmp.name) / name, result, ctx)
            results.append(result)
            outputs.append({path.name: path.read_bytes() for path in paths if path.suffix == '.csv'})
        return results, outputs

    def test_curvature_decomposition(self):
        """Test the pair and triple parts add up to the direct energy"""
        config = load_experiment_config(self.write_config(CURVATURE_CONFIG), ExperimentConfigSerializer)
        result = run_experiment(ExperimentContext(config, seed=5))
        rows = result.tables['decomposition'].rows
        self.assertEqual([row[4] for row in rows[:4]], ['pair', 'triple', 'total', 'direct'])
        self.assertEqual(len(rows), 8)
        for i in range(0, len(rows), 4):
            total, direct = rows[i + 2][5], rows[i + 3][5]
            self.assertAlmostEqual(total, direct, delta=1e-10 * direct)

    def test_acceptance_run_is_deterministic(self):
        """Test the criteria table repeats byte for byte and keeps timings out of it"""
        results, outputs = self.run_twice(ACCEPTANCE_CONFIG)
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(results[0].tables['criteria'].header, ('criterion', 'name', 'passed', 'detail'))
        criteria = results[0].summary['criteria']
        self.assertEqual([c['criterion'] for c in criteria], [1])
        self.assertIn('seconds', criteria[0])

    def test_energy_run_is_deterministic(self):
        """Test the ratio and norm tables repeat byte for byte"""
        results, outputs = self.run_twice(ENERGY_CONFIG)
        self.assertEqual(outputs[0], outputs[1])
        for table in ('ratios', 'norms', 'maximal', 'uniform_bound'):
            self.assertIn(f'energy-ratios_{table}.csv', outputs[0])

    def test_energy_norm_tables(self):
        """Test one norm row per instance and one growth row per function and size"""
        config = load_experiment_config(self.write_config(ENERGY_CONFIG), ExperimentConfigSerializer)
        result = run_experiment(ExperimentContext(config, seed=5))
        norms = result.tables['norms']
        # two functions, two sizes, two dimensions, two instances
        self.assertEqual(len(norms.rows), 16)
        for row in norms.rows:
            record = dict(zip(norms.header, row))
            self.assertGreater(record['norm_squared'], 0.0)
            self.assertAlmostEqual(record['upper_ratio'], record['norm_squared'] / record['wolff_sup'],
                                   delta=1e-12 * record['upper_ratio'])
            self.assertAlmostEqual(record['uniform_bound'] ** 2, record['kappa'] ** 2 * record['norm_squared'],
                                   delta=1e-9 * record['uniform_bound'] ** 2)
        maximal = result.tables['maximal']
        excess = maximal.header.index('excess')
        self.assertTrue(all(row[excess] >= -1e-12 for row in maximal.rows))
        growth = result.tables['uniform_bound']
        low, high = str(PowerPhi(0.3)), str(PowerPhi(0.7))
        self.assertEqual([(row[0], row[1]) for row in growth.rows], [(low, 3), (low, 6), (high, 3), (high, 6)])
        summary = result.summary['functions'][low]['norms']
        self.assertEqual(set(summary['uniform_bound_by_size']), {'3', '6'})

    def test_capacity_transform_dump(self):
        """Test the optimal measure's transform is dumped and stays within the LP bound"""
        config = load_experiment_config(self.write_config(CAPACITY_CONFIG), ExperimentConfigSerializer)
        result = run_experiment(ExperimentContext(config, seed=5))
        transform = result.tables['transform']
        self.assertEqual(transform.header, ('instance_id', 'phi', 'h', 'x0', 'r0', 'norm'))
        self.assertTrue(transform.rows)
        for row in transform.rows:
            self.assertAlmostEqual(row[5], abs(row[4]), delta=1e-15)
            self.assertLessEqual(row[5], 1.0 + 1e-8)


class WolffcapCommandTests(ConfigFileMixin, SimpleTestCase):
    """Test the wolffcap management command"""

    def test_run(self):
        """Test a run writes tables and a summary naming the seed"""
        path = self.write_config(CURVATURE_CONFIG)
        out = Path(self.tmp.name) / 'out'
        stdout = StringIO()
        call_command('wolffcap', 'curvature-corpus', config=str(path), out=str(out), seed=3, stdout=stdout)
        summary = json.loads((out / 'curvature-corpus_summary.json').read_text())
        self.assertEqual(summary['seed'], 3)
        self.assertTrue(summary['passed'])
        self.assertEqual(summary['inputs']['samples'], '500')
        self.assertIn('passed', stdout.getvalue())

    def test_mismatched_experiment(self):
        """Test a configuration for another experiment is refused"""
        path = self.write_config(CURVATURE_CONFIG)
        with self.assertRaises(CommandError):
            call_command('wolffcap', 'metric', config=str(path), out=self.tmp.name, stdout=StringIO())

    def test_bad_config(self):
        """Test configuration errors surface as CommandError with the line"""
        path = self.write_config("experiment = curvature-corpus\nfamilies = nope\n")
        with self.assertRaisesRegex(CommandError, 'line 2'):
            call_command('wolffcap', 'curvature-corpus', config=str(path), out=self.tmp.name, stdout=StringIO())
