from forecasting.experiment import write_workspace_config
from forecasting.synthetic import generate_synthetic

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Write the seeded synthetic campus dataset into <out>/data and point the workspace at it.'

    def run(self, config, **options):
        dataset = generate_synthetic(config.seed, config.output_dir / 'data', locale=config.locale)
        targets = [f'data/{path.name}' for path in dataset.targets.values()]
        exogenous = [f'data/{dataset.activity.name}', f'data/{dataset.climate.name}']
        path = write_workspace_config(config.output_dir, targets, exogenous, config.locale, config.seed)
        return f'Synthetic dataset written; configuration in {path}'
