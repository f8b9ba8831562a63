import json

from forecasting.exceptions import ConfigurationError
from forecasting.pipeline import run_forecast

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Fit the tuned models and forecast the holdout months recursively.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--family', action='append', choices=('rf', 'svr'), dest='families',
                            help='Forecast with this model family only (repeatable).')
        parser.add_argument('--params', help='Explicit genes as JSON instead of the optimiser result, '
                                             'e.g. \'{"n_estimators": 50, "max_depth": 100, "lags": 2}\'.')

    def run(self, config, **options):
        genes = None
        if options.get('params'):
            try:
                genes = json.loads(options['params'])
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f'--params is not valid JSON: {exc}') from exc
            if not isinstance(genes, dict):
                raise ConfigurationError('--params must be a JSON object')
            if not options.get('families') or len(options['families']) != 1:
                raise ConfigurationError('--params needs exactly one --family')
        rows = run_forecast(config, families=options.get('families'), genes=genes)
        for row in rows:
            self.stdout.write(
                f"{row['series']} {row['model']} {row['feature_config']}: "
                f"MAPE {row['mape_percent']:.2f}%, RMSE {row['rmse']:.2f}"
            )
        return f'{len(rows)} forecast(s) written to {config.workspace_paths["forecast"]}'
