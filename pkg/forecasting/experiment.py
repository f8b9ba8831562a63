"""Experiment configuration: settings defaults, then an experiment YAML, then CLI flags."""

from dataclasses import asdict, dataclass, field, replace
import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from django.conf import settings
import yaml

from .data import LOCALES
from .evaluation import FeatureConfig, ModelKind
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

WORKSPACE_CONFIG = 'experiment.yaml'
SECTIONS = ('data', 'experiment', 'ga')


@dataclass(frozen=True)
class ExperimentConfig:
    targets: tuple = ()
    exogenous: tuple = ()
    locale: str = 'period'
    horizon: int = 12
    arms: tuple = (FeatureConfig.WITH_CLIMATE, FeatureConfig.WITHOUT_CLIMATE)
    presets: tuple = ((100, 200), (200, 500), (500, 1000))
    families: tuple = (ModelKind.RF, ModelKind.SVR)
    seed: int = 2024
    output_dir: Path = field(default_factory=lambda: Path('runs/default'))
    workers: int = 1
    alpha: float = 0.05
    mutation_probability: float = 0.1
    elite_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, 'targets', tuple(Path(path) for path in self.targets))
        object.__setattr__(self, 'exogenous', tuple(Path(path) for path in self.exogenous))
        object.__setattr__(self, 'output_dir', Path(self.output_dir))
        try:
            object.__setattr__(self, 'arms', tuple(FeatureConfig(arm) for arm in self.arms))
            object.__setattr__(self, 'families', tuple(ModelKind(family) for family in self.families))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        try:
            presets = tuple((int(population), int(generations)) for population, generations in self.presets)
        except (TypeError, ValueError):
            raise ConfigurationError(f'GA presets must be (population, generations) pairs, got {self.presets!r}') from None
        object.__setattr__(self, 'presets', presets)

        if self.horizon < 1:
            raise ConfigurationError(f'horizon must be at least 1, got {self.horizon}')
        if not self.families:
            raise ConfigurationError('at least one model family is required')
        unknown = [family for family in self.families if family not in (ModelKind.RF, ModelKind.SVR)]
        if unknown:
            raise ConfigurationError(f'only rf and svr can be optimised, got {[str(f) for f in unknown]}')
        if not self.arms:
            raise ConfigurationError('at least one feature arm is required')
        if not self.presets:
            raise ConfigurationError('at least one GA preset is required')
        if any(population < 2 or generations < 1 for population, generations in self.presets):
            raise ConfigurationError(f'invalid GA preset in {self.presets}')
        if self.workers < 1:
            raise ConfigurationError(f'workers must be at least 1, got {self.workers}')
        if self.locale not in LOCALES:
            raise ConfigurationError(f'locale must be one of {", ".join(LOCALES)}, got {self.locale!r}')
        if self.seed < 0:
            raise ConfigurationError(f'seed must be unsigned, got {self.seed}')
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f'alpha must lie in (0, 1), got {self.alpha}')

    def _portable(self, path: Path) -> str:
        try:
            return path.resolve().relative_to(self.output_dir.resolve()).as_posix()
        except ValueError:
            return path.as_posix()

    def snapshot(self) -> dict:
        """Everything that determines results; output location and worker count excluded."""
        values = asdict(self)
        values.pop('output_dir')
        values.pop('workers')
        values['targets'] = [self._portable(path) for path in self.targets]
        values['exogenous'] = [self._portable(path) for path in self.exogenous]
        values['arms'] = [arm.value for arm in self.arms]
        values['families'] = [family.value for family in self.families]
        values['presets'] = [list(preset) for preset in self.presets]
        return values

    @property
    def workspace_paths(self):
        root = self.output_dir
        return {
            'dataset': root / 'dataset',
            'reports': root / 'reports',
            'figures': root / 'figures',
            'optimize': root / 'optimize',
            'forecast': root / 'forecast',
            'benchmark': root / 'benchmark',
        }


def defaults() -> ExperimentConfig:
    options = settings.UTILCAST
    return ExperimentConfig(
        locale=options['LOCALE'],
        horizon=options['HORIZON'],
        arms=options['ARMS'],
        presets=options['GA_PRESETS'],
        families=options['FAMILIES'],
        seed=options['SEED'],
        output_dir=options['OUTPUT_DIR'],
        workers=options['WORKERS'],
        alpha=options['ALPHA'],
        mutation_probability=options['MUTATION_PROBABILITY'],
        elite_fraction=options['ELITE_FRACTION'],
    )


def _resolve(paths, base: Path) -> list:
    if isinstance(paths, (str, Path)):
        paths = [paths]
    return [path if Path(path).is_absolute() else base / path for path in paths or []]


def read_config_file(path: Union[str, Path]) -> dict:
    """Flatten an experiment YAML into ExperimentConfig keyword arguments."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f'{path}: configuration file not found')
    try:
        raw = yaml.safe_load(path.read_text(encoding='utf-8')) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f'{path}: invalid YAML: {exc}') from exc
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f'{path}: expected sections {", ".join(SECTIONS)}')
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f'{path}: unknown sections {sorted(unknown)}')

    base = path.parent
    data = raw.get('data') or {}
    experiment = raw.get('experiment') or {}
    ga = raw.get('ga') or {}
    values = {}
    if 'targets' in data:
        values['targets'] = _resolve(data['targets'], base)
    if 'exogenous' in data:
        values['exogenous'] = _resolve(data['exogenous'], base)
    if 'locale' in data:
        values['locale'] = data['locale']
    for key in ('horizon', 'arms', 'families', 'seed', 'workers', 'alpha'):
        if key in experiment:
            values[key] = experiment[key]
    if 'output_dir' in experiment:
        values['output_dir'] = _resolve(experiment['output_dir'], base)[0]
    for key in ('presets', 'mutation_probability', 'elite_fraction'):
        if key in ga:
            values[key] = ga[key]
    known = {field_name for field_name in ExperimentConfig.__dataclass_fields__}
    stray = [key for section in (data, experiment, ga) for key in section if key not in known]
    if stray:
        raise ConfigurationError(f'{path}: unknown keys {sorted(stray)}')
    return values


def load_config(config_path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """Build the effective configuration.

    Without an explicit `config_path`, an `experiment.yaml` inside the output
    directory is used when present, so `synth` followed by the other commands
    on the same `--out` needs no further flags. Overrides equal to None are
    ignored.
    """
    config = defaults()
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if 'output_dir' in overrides:
        config = replace(config, output_dir=Path(overrides['output_dir']))
    if config_path is None:
        candidate = config.output_dir / WORKSPACE_CONFIG
        if candidate.exists():
            config_path = candidate
    if config_path is not None:
        try:
            config = replace(config, **read_config_file(config_path))
        except TypeError as exc:
            raise ConfigurationError(f'{config_path}: {exc}') from exc
        logger.debug('Loaded experiment configuration from %s', config_path)
    return replace(config, **overrides)


def write_workspace_config(directory: Union[str, Path], targets: Sequence[str], exogenous: Sequence[str],
                           locale: str, seed: int) -> Path:
    payload = {
        'data': {'targets': list(targets), 'exogenous': list(exogenous), 'locale': locale},
        'experiment': {'seed': seed},
    }
    path = Path(directory) / WORKSPACE_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding='utf-8')
    return path
