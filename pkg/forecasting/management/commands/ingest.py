from forecasting.pipeline import run_ingest

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Load, aggregate and join the input CSVs into the canonical monthly dataset.'

    def run(self, config, **options):
        result = run_ingest(config)
        for row in result.summary.to_dict('records'):
            self.stdout.write(
                f"{row['series']}: {row['observations']} months, mean {row['mean']:.2f}, std {row['std']:.2f}"
            )
        return f'Ingested {len(result.tables)} series into {config.workspace_paths["dataset"]}'
