from forecasting.evaluation import ModelKind
from forecasting.pipeline import run_benchmark

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Compare the smoothing baselines with the best tuned RF and SVR forecasts.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--baselines-only', action='store_true',
                            help='Skip the machine-learning models; no optimisation results needed.')
        parser.add_argument('--family', action='append', choices=('rf', 'svr'), dest='families',
                            help='Include only this tuned model family (repeatable).')

    def config_overrides(self, options):
        overrides = super().config_overrides(options)
        overrides['families'] = options.get('families')
        return overrides

    def run(self, config, **options):
        results = run_benchmark(config, baselines_only=options['baselines_only'])
        for series, rows in results.items():
            best = next(row for row in rows if row.best_rmse)
            self.stdout.write(f'{series}: lowest RMSE from {ModelKind(best.model_kind).label} ({best.rmse:.2f})')
        return f'Benchmark written to {config.workspace_paths["reports"]}'
