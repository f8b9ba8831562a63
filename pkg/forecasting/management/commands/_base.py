import logging

from django.core.management.base import BaseCommand, CommandError

from forecasting.exceptions import ForecastingError
from forecasting.experiment import load_config
from forecasting.persistence import write_manifest

logger = logging.getLogger('forecasting')


class ExperimentCommand(BaseCommand):
    """
    Shared flags and error handling for the pipeline commands.

    Subclasses implement `run(config, **options)` and return a one-line summary.
    Library errors become CommandError so the process exits non-zero. Once the
    configuration is valid, it is recorded in `<out>/manifest.json` whether or
    not the run succeeds.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Experiment YAML (defaults to <out>/experiment.yaml when present).')
        parser.add_argument('--seed', type=int, help='Root seed for every random draw.')
        parser.add_argument('--horizon', type=int, help='Holdout and forecast length in months.')
        arms = parser.add_mutually_exclusive_group()
        arms.add_argument('--with-climate', dest='arms', action='store_const', const=('with-climate',),
                          help='Only the feature arm that includes climate columns.')
        arms.add_argument('--without-climate', dest='arms', action='store_const', const=('without-climate',),
                          help='Only the feature arm without climate columns.')
        parser.add_argument('--locale', choices=('period', 'comma'), help='Decimal separator of the input CSVs.')
        parser.add_argument('--out', dest='output_dir', help='Workspace directory for every artifact.')
        parser.add_argument('--workers', type=int, help='Parallel experiment-grid workers.')

    def config_overrides(self, options) -> dict:
        return {key: options.get(key) for key in ('seed', 'horizon', 'arms', 'locale', 'output_dir', 'workers')}

    def handle(self, *args, **options):
        try:
            config = load_config(options.get('config'), **self.config_overrides(options))
        except ForecastingError as exc:
            raise CommandError(str(exc)) from exc
        try:
            options.pop('config', None)
            summary = self.run(config, **options)
        except ForecastingError as exc:
            raise CommandError(str(exc)) from exc
        finally:
            write_manifest(config.output_dir, self.command_name, config.snapshot(), config.seed)
        if summary:
            self.stdout.write(self.style.SUCCESS(summary))

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def run(self, config, **options) -> str:
        raise NotImplementedError
