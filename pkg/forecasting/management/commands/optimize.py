import re

from django.core.management.base import CommandError

from forecasting.exceptions import ConfigurationError
from forecasting.pipeline import run_optimize

from ._base import ExperimentCommand

PRESET = re.compile(r'^(\d+)x(\d+)$')


def parse_presets(text: str) -> tuple:
    """'20x10,50x20' -> ((20, 10), (50, 20))"""
    presets = []
    for item in text.split(','):
        match = PRESET.match(item.strip())
        if not match:
            raise ConfigurationError(f'GA preset {item!r} is not POPULATIONxGENERATIONS')
        presets.append((int(match.group(1)), int(match.group(2))))
    return tuple(presets)


class Command(ExperimentCommand):
    help = 'Tune RF and SVR hyperparameters with the genetic algorithm over the experiment grid.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--resume', action='store_true', help='Continue from existing checkpoints.')
        parser.add_argument('--presets', help='Comma-separated POPULATIONxGENERATIONS pairs, e.g. 20x10.')
        parser.add_argument('--family', action='append', choices=('rf', 'svr'), dest='families',
                            help='Optimise only this model family (repeatable).')

    def config_overrides(self, options):
        overrides = super().config_overrides(options)
        overrides['families'] = options.get('families')
        if options.get('presets'):
            overrides['presets'] = parse_presets(options['presets'])
        return overrides

    def run(self, config, **options):
        rows = run_optimize(config, resume=options['resume'], progress=options['verbosity'] > 1)
        failed = [row for row in rows if row.get('error')]
        for row in failed:
            self.stderr.write(
                f"{row['series']}/{row['feature_config']}/{row['family']}/"
                f"p{row['population']}-g{row['generations']}: {row['error']}"
            )
        if failed:
            raise CommandError(f'{len(failed)} of {len(rows)} optimisation run(s) failed')
        return f'{len(rows)} optimisation run(s) written to {config.workspace_paths["optimize"]}'
