from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ConfigError, WolffcapError
from apps.experiments.config import load_experiment_config
from apps.experiments.runner import ExperimentContext, run_experiment
from apps.experiments.serializers import ALIASES, EXPERIMENTS, ExperimentConfigSerializer
from apps.experiments.writers import write_result


class Command(BaseCommand):
    help = 'Run a wolffcap experiment and write its CSV tables and JSON summary'

    def add_arguments(self, parser):
        parser.add_argument('experiment', choices=EXPERIMENTS + tuple(ALIASES))
        parser.add_argument('--config', help='Experiment configuration file (default: the shipped one)')
        parser.add_argument('--seed', type=int, help='Root seed; overrides the configuration')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--threads', type=int, help='Worker processes for corpus experiments')

    def handle(self, *args, **options):
        defaults = settings.WOLFFCAP
        experiment = ALIASES.get(options['experiment'], options['experiment'])
        path = Path(options['config'] or defaults['CONFIG_DIR'] / f'{experiment}.env')

        try:
            config = load_experiment_config(path, ExperimentConfigSerializer)
        except ConfigError as exc:
            raise CommandError(f"{path}: {exc}") from exc
        if config.experiment != experiment:
            raise CommandError(f"{path} configures '{config.experiment}', not '{experiment}'.")

        seed = options['seed'] if options['seed'] is not None else config.seed
        if seed is None:
            seed = defaults['DEFAULT_SEED']
        if seed < 0:
            raise CommandError("The seed must be nonnegative.")
        threads = options['threads'] or defaults['THREADS']
        out_dir = Path(options['out'] or defaults['OUTPUT_DIR'])

        context = ExperimentContext(
            config=config,
            seed=seed,
            threads=max(1, threads),
            power_tol=defaults['POWER_TOL'],
            power_max_iter=defaults['POWER_MAX_ITER'],
            lp_max_pivots=defaults['LP_MAX_PIVOTS'],
        )
        self.stdout.write(f"Running {experiment} with seed {seed} ({context.threads} worker(s))")
        try:
            result = run_experiment(context)
        except WolffcapError as exc:
            raise CommandError(f"{experiment}: {exc}") from exc

        for written in write_result(out_dir, result, context):
            self.stdout.write(f"  wrote {written}")

        if result.failures:
            for failure in result.failures:
                self.stderr.write(self.style.ERROR(failure))
            raise CommandError(f"{experiment}: {len(result.failures)} hard failure(s)")
        self.stdout.write(self.style.SUCCESS(f"{experiment} passed in {result.wall_time:.1f}s"))
