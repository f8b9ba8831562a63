"""Stage runners behind the management commands.

Each stage reads and writes a workspace directory (the `--out` option):

    dataset/    canonical monthly tables written by ingest
    reports/    CSV + markdown tables
    figures/    SVG charts
    optimize/   per-combination GA checkpoints and results
    forecast/   per-combination forecasts and fitted models
    benchmark/  fitted baseline parameters
"""

from dataclasses import dataclass, field
import itertools
import logging
from pathlib import Path
from typing import Dict, List, Optional

from joblib import Parallel, delayed
import numpy as np
import pandas as pd

from . import reports
from .data import join_exogenous, load_dataset, load_monthly, save_dataset
from .diagnostics import run_battery
from .evaluation import (
    BASELINE_KINDS,
    baseline_run,
    compare_models,
    evaluate_run,
    FeatureConfig,
    forecast_holdout,
    ModelKind,
)
from .exceptions import ConfigurationError, DataError, ForecastingError
from .experiment import ExperimentConfig
from .ga import decode_genome, evolve, GaConfig, HoldoutTask, schema_for
from .models import FeatureKind, FeatureTable
from .persistence import read_json, save_model, write_json

logger = logging.getLogger(__name__)

INDEX_FILE = 'index.json'


def combination_seed(seed: int, *indices: int) -> int:
    """Seed for one grid cell, independent of scheduling order and worker count."""
    return int(np.random.SeedSequence([seed, *indices]).generate_state(1)[0])


def arm_table(table: FeatureTable, arm: FeatureConfig) -> FeatureTable:
    if FeatureConfig(arm).include_climate:
        return table
    return table.without_kinds(FeatureKind.CLIMATE)


# Ingest

@dataclass
class IngestResult:
    tables: Dict[str, FeatureTable]
    summary: pd.DataFrame
    paths: List[Path] = field(default_factory=list)


def run_ingest(config: ExperimentConfig) -> IngestResult:
    if not config.targets:
        raise ConfigurationError('no target files configured; pass --config or run synth into this workspace')
    targets = [series for path in config.targets for series in load_monthly(path, locale=config.locale)]
    exogenous = [series for path in config.exogenous for series in load_monthly(path, locale=config.locale)]
    paths = config.workspace_paths
    tables = {}
    for target in targets:
        table = join_exogenous(target, exogenous, include_climate=True)
        tables[target.name] = table
        save_dataset(table, paths['dataset'])
        logger.info('Ingested %s: %d months, %d features', target.name, len(table), len(table.column_names))
    write_json(paths['dataset'] / INDEX_FILE, {'series': list(tables)})

    summary = reports.summary_frame(targets)
    written = list(reports.write_report(paths['reports'], 'summary', summary, 'Consumption data summary'))
    written.append(reports.overview_chart(paths['figures'] / 'overview.svg', targets))
    return IngestResult(tables=tables, summary=summary, paths=written)


def load_tables(config: ExperimentConfig) -> Dict[str, FeatureTable]:
    directory = config.workspace_paths['dataset']
    index = directory / INDEX_FILE
    if not index.exists():
        raise DataError('canonical dataset not found; run ingest first', path=directory)
    return {name: load_dataset(directory / f'{name}.csv') for name in read_json(index)['series']}


# Analyze

def run_analyze(config: ExperimentConfig) -> int:
    """Write the diagnostics tables; returns the number of tests that errored."""
    tables = load_tables(config)
    frames, correlograms, failures = [], [], 0
    for name, table in tables.items():
        report = run_battery(table.target_series(), alpha=config.alpha)
        failures += len(report.errors)
        frames.append(reports.diagnostics_frame(report))
        correlograms.append(reports.correlogram_frame(report))
    frame = pd.concat(frames, ignore_index=True)
    paths = config.workspace_paths
    reports.write_report(paths['reports'], 'diagnostics', frame, 'Trend, seasonality and stationarity tests',
                         reports.diagnostics_markdown(frame, config.alpha))
    reports.write_csv(pd.concat(correlograms, ignore_index=True), paths['reports'] / 'correlograms.csv')
    return failures


# Optimize

@dataclass(frozen=True)
class Combination:
    series: str
    arm: FeatureConfig
    family: ModelKind
    population: int
    generations: int
    seed: int

    @property
    def directory(self) -> Path:
        return Path(self.series) / self.arm.value / self.family.value / f'p{self.population}-g{self.generations}'

    @property
    def label(self) -> str:
        return f'{self.series}/{self.arm}/{self.family}/p{self.population}-g{self.generations}'


def combinations(config: ExperimentConfig, series_names) -> List[Combination]:
    grid = itertools.product(
        enumerate(series_names), enumerate(config.arms), enumerate(config.families), enumerate(config.presets),
    )
    return [
        Combination(series, arm, family, population, generations,
                    combination_seed(config.seed, s, a, f, p))
        for (s, series), (a, arm), (f, family), (p, (population, generations)) in grid
    ]


def optimize_one(combination: Combination, table: FeatureTable, config: ExperimentConfig,
                 root: Path, resume: bool, n_jobs: int, progress: bool) -> dict:
    """Run one GA and write its result; errors come back in the row."""
    row = {
        'series': combination.series,
        'feature_config': combination.arm.value,
        'family': combination.family.value,
        'population': combination.population,
        'generations': combination.generations,
    }
    directory = root / combination.directory
    try:
        schema = schema_for(combination.family)
        ga_config = GaConfig(
            population_size=combination.population,
            generations=combination.generations,
            mutation_probability=config.mutation_probability,
            elite_fraction=config.elite_fraction,
            seed=combination.seed,
            n_jobs=n_jobs,
        )
        task = HoldoutTask(combination.family, arm_table(table, combination.arm), config.horizon, combination.seed)
        result = evolve(schema, ga_config, task, checkpoint=directory / 'checkpoint.json', resume=resume,
                        progress=progress, label=combination.label)
    except ForecastingError as exc:
        logger.warning('%s failed: %s', combination.label, exc)
        return {**row, 'error': str(exc)}

    fitness = result.best.fitness if np.isfinite(result.best.fitness) else None
    write_json(directory / 'result.json', {
        **row,
        'model_seed': combination.seed,
        'genes': result.best_genes,
        'fitness': fitness,
        'trace': [value if np.isfinite(value) else None for value in result.trace],
        'evaluations': result.evaluations,
        'cache_verified': result.cache_verified,
    })
    return {**row, **result.best_genes, 'fitness': fitness, 'time_seconds': result.wall_time_seconds,
            'evaluations': result.evaluations, 'error': None}


def run_optimize(config: ExperimentConfig, resume: bool = False, progress: bool = False) -> List[dict]:
    tables = load_tables(config)
    grid = combinations(config, list(tables))
    root = config.workspace_paths['optimize']
    logger.info('Optimising %d combinations with %d worker(s)', len(grid), config.workers)
    if config.workers == 1:
        rows = [optimize_one(cell, tables[cell.series], config, root, resume, 1, progress) for cell in grid]
    else:
        rows = Parallel(n_jobs=config.workers)(
            delayed(optimize_one)(cell, tables[cell.series], config, root, resume, 1, False) for cell in grid
        )

    paths = config.workspace_paths
    write_json(root / INDEX_FILE, {'presets': [list(preset) for preset in config.presets]})
    for family in config.families:
        family_rows = [row for row in rows if row['family'] == family.value]
        frame = reports.ga_frame(family_rows)
        reports.write_report(paths['reports'], f'optimize_{family.value}', frame,
                             f'Best {family.label} hyperparameters per GA preset',
                             reports.ga_markdown(family_rows, schema_for(family).names))
    return rows


def optimised_presets(config: ExperimentConfig) -> list:
    """Presets of the last optimize run in this workspace, else the configured ones."""
    index = config.workspace_paths['optimize'] / INDEX_FILE
    if index.exists():
        return [tuple(preset) for preset in read_json(index)['presets']]
    return list(config.presets)


def best_result(config: ExperimentConfig, series: str, arm: FeatureConfig, family: ModelKind) -> dict:
    """Lowest-fitness result over the optimised presets (earlier presets win ties)."""
    root = config.workspace_paths['optimize']
    best = None
    for population, generations in optimised_presets(config):
        path = root / series / arm.value / family.value / f'p{population}-g{generations}' / 'result.json'
        if not path.exists():
            continue
        result = read_json(path)
        if result['fitness'] is None:
            continue
        if best is None or result['fitness'] < best['fitness']:
            best = result
    if best is None:
        raise DataError(f'no optimisation result for {series}/{arm}/{family}; run optimize first', path=root)
    return best


# Forecast

def resolve_model(config: ExperimentConfig, series: str, arm: FeatureConfig, family: ModelKind,
                  genes: Optional[dict] = None):
    """(params, lags, genes) from explicit genes or from the optimiser's best result."""
    if genes is None:
        result = best_result(config, series, arm, family)
        genes, seed = result['genes'], result['model_seed']
    else:
        schema = schema_for(family)
        missing = [name for name in schema.names if name not in genes]
        if missing:
            raise ConfigurationError(f'{family} parameters are missing {missing}')
        schema.validate([genes[name] for name in schema.names])
        seed = config.seed
    params, lags = decode_genome(family, genes, seed)
    return params, lags, genes


def run_forecast(config: ExperimentConfig, families=None, genes: Optional[dict] = None) -> List[dict]:
    tables = load_tables(config)
    families = [ModelKind(family) for family in (families or config.families)]
    paths = config.workspace_paths
    rows = []
    for name, table in tables.items():
        series = table.target_series()
        panels, runs = [], []
        for arm in config.arms:
            for family in families:
                params, lags, used = resolve_model(config, name, arm, family, genes)
                run, model = forecast_holdout(family, params, arm_table(table, arm), lags, config.horizon)
                metrics = evaluate_run(run)
                directory = paths['forecast'] / name / arm.value / family.value
                reports.write_csv(pd.DataFrame({
                    'month': run.months.astype(str),
                    'actual': run.actuals,
                    'predicted': run.predictions,
                }), directory / 'forecast.csv')
                save_model(model, directory / 'model.json')
                write_json(directory / 'metrics.json', {
                    'genes': used, 'mape_percent': metrics.mape_percent, 'rmse': metrics.rmse, 'mse': metrics.mse,
                })
                title = f'{name}: {family.label} {arm.value}'
                reports.forecast_chart(directory / 'forecast.svg', series.months[:-config.horizon],
                                       series.values[:-config.horizon], run.months, run.actuals,
                                       run.predictions, title)
                panels.append((f'{family.label} {arm.value}', run.predictions))
                runs.append(run)
                rows.append({'series': name, 'model': family.value, 'feature_config': arm.value,
                             'mape_percent': metrics.mape_percent, 'rmse': metrics.rmse, 'mse': metrics.mse})
        comparison = compare_models(runs)
        with_climate = any(arm.include_climate for arm in config.arms)
        reports.write_report(paths['reports'], f'performance_{name}', reports.comparison_frame(comparison, name),
                             f'Forecast performance: {name}', reports.comparison_markdown(comparison),
                             reports.caveat_footnotes(with_climate))
        reports.forecast_panel_chart(paths['figures'] / f'{name}_forecasts.svg', series, panels[:4], config.horizon)
    return rows


# Benchmark

def best_ml_run(config: ExperimentConfig, name: str, table: FeatureTable, family: ModelKind):
    """The family's holdout forecast on whichever arm scores the lower RMSE."""
    best, best_rmse = None, np.inf
    for arm in config.arms:
        params, lags, _ = resolve_model(config, name, arm, family)
        run, _ = forecast_holdout(family, params, arm_table(table, arm), lags, config.horizon)
        score = evaluate_run(run).rmse
        if best is None or score < best_rmse:
            best, best_rmse = run, score
    return best


def run_benchmark(config: ExperimentConfig, baselines_only: bool = False) -> Dict[str, list]:
    tables = load_tables(config)
    paths = config.workspace_paths
    frames, results = [], {}
    for name, table in tables.items():
        series = table.target_series()
        runs, fitted = [], {}
        if not baselines_only:
            runs += [best_ml_run(config, name, table, family) for family in config.families]
        for kind in BASELINE_KINDS:
            run, params = baseline_run(kind, series, config.horizon)
            runs.append(run)
            fitted[kind.value] = {'alpha': params.alpha, 'beta': params.beta, 'gamma': params.gamma_s,
                                  'period': params.period}
        write_json(paths['benchmark'] / name / 'baselines.json', fitted)
        comparison = compare_models(runs)
        frame = reports.comparison_frame(comparison, name)
        reports.write_report(paths['reports'], f'benchmark_{name}', frame, f'Model comparison: {name}',
                             reports.comparison_markdown(comparison))
        frames.append(frame)
        results[name] = comparison
    reports.write_csv(pd.concat(frames, ignore_index=True), paths['reports'] / 'benchmark.csv')
    return results
