from django.core.management.base import CommandError

from forecasting.pipeline import run_analyze

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run the trend, seasonality and stationarity tests plus ACF/PACF on every series.'

    def run(self, config, **options):
        failures = run_analyze(config)
        if failures:
            raise CommandError(f'{failures} diagnostic test(s) failed; see {config.workspace_paths["reports"]}')
        return f'Diagnostics written to {config.workspace_paths["reports"]}'
