"""Genetic algorithm over mixed-type hyperparameter genomes.

Every random draw comes from a stream keyed by (seed, generation, slot), so a
run is reproducible whether fitness is evaluated serially or in parallel and
whether it ran straight through or resumed from a checkpoint.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
import json
import logging
import math
from pathlib import Path
import time
from typing import Callable, Dict, Optional, Sequence, Union

from joblib import Parallel, delayed
import numpy as np
from tqdm import tqdm

from .evaluation import forecast_holdout, ModelKind, mse
from .exceptions import ForecastingError, GenomeError
from .forest import ForestParams
from .models import FeatureTable
from .svr import KernelSpec, SvrParams

logger = logging.getLogger(__name__)

FAILED_FITNESS = math.inf
MUTATION_FACTOR = (0.5, 1.2)


class GeneKind(str, Enum):
    INT = 'int-range'
    FLOAT = 'float-range'
    CATEGORICAL = 'categorical'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GeneSpec:
    name: str
    kind: GeneKind
    low: Optional[float] = None
    high: Optional[float] = None
    choices: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', GeneKind(self.kind))
        object.__setattr__(self, 'choices', tuple(self.choices))
        if self.kind is GeneKind.CATEGORICAL:
            if not self.choices or len(set(self.choices)) != len(self.choices):
                raise GenomeError(f'gene {self.name!r} needs non-empty, unique choices')
        elif self.low is None or self.high is None or not self.low < self.high:
            raise GenomeError(f'gene {self.name!r} needs low < high, got {self.low}..{self.high}')

    @property
    def numeric(self) -> bool:
        return self.kind is not GeneKind.CATEGORICAL

    def sample(self, rng: np.random.Generator):
        if self.kind is GeneKind.INT:
            return int(rng.integers(int(self.low), int(self.high) + 1))
        if self.kind is GeneKind.FLOAT:
            return float(rng.uniform(self.low, self.high))
        return self.choices[int(rng.integers(len(self.choices)))]

    def clamp(self, value):
        if self.kind is GeneKind.INT:
            return int(min(max(int(round(value)), int(self.low)), int(self.high)))
        return float(min(max(value, self.low), self.high))

    def contains(self, value) -> bool:
        if self.kind is GeneKind.CATEGORICAL:
            return value in self.choices
        if self.kind is GeneKind.INT and int(value) != value:
            return False
        return self.low <= value <= self.high

    def mutate(self, value, rng: np.random.Generator):
        if self.kind is GeneKind.CATEGORICAL:
            return self.choices[int(rng.integers(len(self.choices)))]
        return self.clamp(value * rng.uniform(*MUTATION_FACTOR))


@dataclass(frozen=True)
class GenomeSchema:
    genes: tuple

    def __post_init__(self):
        object.__setattr__(self, 'genes', tuple(self.genes))
        names = [gene.name for gene in self.genes]
        if not names:
            raise GenomeError('a schema needs at least one gene')
        if len(set(names)) != len(names):
            raise GenomeError(f'duplicate gene names in {names}')

    def __len__(self):
        return len(self.genes)

    @property
    def names(self) -> list:
        return [gene.name for gene in self.genes]

    def validate(self, values: Sequence):
        if len(values) != len(self.genes):
            raise GenomeError(f'genome has {len(values)} genes, schema has {len(self.genes)}')
        for gene, value in zip(self.genes, values):
            if not gene.contains(value):
                raise GenomeError(f'gene {gene.name!r} value {value!r} outside its range')

    def decode(self, values: Sequence) -> Dict[str, object]:
        self.validate(values)
        return dict(zip(self.names, values))


RF_SCHEMA = GenomeSchema((
    GeneSpec('n_estimators', GeneKind.INT, 5, 200),
    GeneSpec('max_depth', GeneKind.INT, 50, 200),
    GeneSpec('lags', GeneKind.INT, 0, 20),
))

SVR_SCHEMA = GenomeSchema((
    GeneSpec('kernel', GeneKind.CATEGORICAL, choices=('poly', 'sigmoid', 'rbf')),
    GeneSpec('epsilon', GeneKind.FLOAT, 0.00001, 1.0),
    GeneSpec('C', GeneKind.FLOAT, 1.0, 3000.0),
    GeneSpec('lags', GeneKind.INT, 0, 20),
))

SCHEMAS = {ModelKind.RF: RF_SCHEMA, ModelKind.SVR: SVR_SCHEMA}


def schema_for(family) -> GenomeSchema:
    try:
        return SCHEMAS[ModelKind(family)]
    except (KeyError, ValueError):
        raise GenomeError(f'no genome schema for model family {family!r}') from None


def decode_genome(family, genes: Dict[str, object], seed: int = 0):
    """Turn decoded genes into (model params, lag count)."""
    family = ModelKind(family)
    if family is ModelKind.RF:
        params = ForestParams(n_estimators=int(genes['n_estimators']), max_depth=int(genes['max_depth']), seed=seed)
    elif family is ModelKind.SVR:
        params = SvrParams(kernel=KernelSpec(kind=genes['kernel']), C=float(genes['C']),
                           epsilon=float(genes['epsilon']))
    else:
        raise GenomeError(f'no genome schema for model family {family!r}')
    return params, int(genes['lags'])


@dataclass(frozen=True)
class Individual:
    genes: tuple
    fitness: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'genes', tuple(self.genes))


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 200
    mutation_probability: float = 0.1
    elite_fraction: float = 0.1
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise GenomeError(f'population_size must be at least 2, got {self.population_size}')
        if self.generations < 1:
            raise GenomeError(f'generations must be positive, got {self.generations}')
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise GenomeError(f'mutation_probability must lie in [0, 1], got {self.mutation_probability}')
        if not 0.0 < self.elite_fraction < 1.0:
            raise GenomeError(f'elite_fraction must lie in (0, 1), got {self.elite_fraction}')
        if self.seed < 0:
            raise GenomeError(f'seed must be unsigned, got {self.seed}')

    @property
    def elite_count(self) -> int:
        return min(self.population_size, max(1, round(self.elite_fraction * self.population_size)))


def slot_rng(seed: int, generation: int, slot: int) -> np.random.Generator:
    return np.random.default_rng([seed, generation, slot])


def init_population(schema: GenomeSchema, config: GaConfig) -> list:
    population = []
    for slot in range(config.population_size):
        rng = slot_rng(config.seed, 0, slot)
        population.append(Individual(tuple(gene.sample(rng) for gene in schema.genes)))
    return population


def crossover(parent_a: Individual, parent_b: Individual, rng: np.random.Generator) -> Individual:
    """Take each gene from either parent with probability 1/2."""
    if len(parent_a.genes) != len(parent_b.genes):
        raise GenomeError(f'parents have {len(parent_a.genes)} and {len(parent_b.genes)} genes')
    from_a = rng.random(len(parent_a.genes)) < 0.5
    return Individual(tuple(a if pick else b for a, b, pick in zip(parent_a.genes, parent_b.genes, from_a)))


def mutate(individual: Individual, schema: GenomeSchema, probability: float, rng: np.random.Generator) -> Individual:
    """With `probability`, redraw one uniformly chosen gene.

    Numeric genes are scaled by a factor drawn from [0.5, 1.2] and clamped to
    their range; categorical genes take a uniform choice.
    """
    if rng.random() >= probability:
        return Individual(individual.genes)
    index = int(rng.integers(len(schema.genes)))
    genes = list(individual.genes)
    genes[index] = schema.genes[index].mutate(genes[index], rng)
    return Individual(tuple(genes))


def _safe_fitness(task: Callable, schema: GenomeSchema, genes: tuple) -> float:
    try:
        value = float(task(schema.decode(genes)))
    except (ForecastingError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        logger.warning('fitness evaluation failed for %s: %s', dict(zip(schema.names, genes)), exc)
        return FAILED_FITNESS
    if not math.isfinite(value):
        logger.warning('non-finite fitness for %s', dict(zip(schema.names, genes)))
        return FAILED_FITNESS
    return value


class FitnessCache:
    """Fitness by genome value; evaluates each distinct genome once."""

    def __init__(self, task: Callable, schema: GenomeSchema, n_jobs: int = 1):
        self.task = task
        self.schema = schema
        self.n_jobs = n_jobs
        self.values: Dict[tuple, float] = {}
        self.evaluations = 0

    def __contains__(self, genes):
        return tuple(genes) in self.values

    def evaluate(self, individuals: Sequence[Individual]) -> list:
        pending = []
        for individual in individuals:
            if individual.genes not in self.values and individual.genes not in pending:
                pending.append(individual.genes)
        if pending:
            if self.n_jobs == 1:
                results = [_safe_fitness(self.task, self.schema, genes) for genes in pending]
            else:
                results = Parallel(n_jobs=self.n_jobs)(
                    delayed(_safe_fitness)(self.task, self.schema, genes) for genes in pending
                )
            self.values.update(zip(pending, results))
            self.evaluations += len(pending)
        return [Individual(individual.genes, self.values[individual.genes]) for individual in individuals]


def evaluate_fitness(individual: Individual, task: Callable, schema: GenomeSchema,
                     cache: Optional[FitnessCache] = None) -> float:
    """Fitness of one genome (lower is fitter); failures score +inf."""
    if cache is not None:
        return cache.evaluate([individual])[0].fitness
    return _safe_fitness(task, schema, individual.genes)


@dataclass(frozen=True)
class HoldoutTask:
    """Fitness = MSE of the recursive holdout forecast for one decoded genome."""

    family: ModelKind
    table: FeatureTable
    horizon: int = 12
    seed: int = 0

    def __call__(self, genes: Dict[str, object]) -> float:
        params, lags = decode_genome(self.family, genes, self.seed)
        run, _ = forecast_holdout(self.family, params, self.table, lags, self.horizon)
        return mse(run.actuals, run.predictions)


@dataclass(frozen=True)
class GaRunResult:
    best: Individual
    trace: tuple
    wall_time_seconds: float
    evaluations: int
    cache_verified: bool
    schema_names: tuple = field(default_factory=tuple)

    @property
    def generations(self) -> int:
        return len(self.trace)

    @property
    def best_genes(self) -> Dict[str, object]:
        return dict(zip(self.schema_names, self.best.genes))


def _ranked(population: Sequence[Individual]) -> list:
    return sorted(population, key=lambda individual: individual.fitness)


def next_generation(ranked: Sequence[Individual], schema: GenomeSchema, config: GaConfig, generation: int) -> list:
    """Elites unchanged, then children of uniformly drawn parents."""
    elites = [Individual(individual.genes) for individual in ranked[:config.elite_count]]
    children = []
    for slot in range(config.elite_count, config.population_size):
        rng = slot_rng(config.seed, generation, slot)
        first, second = rng.integers(len(ranked), size=2)
        child = crossover(ranked[int(first)], ranked[int(second)], rng)
        children.append(mutate(child, schema, config.mutation_probability, rng))
    return elites + children


def _encode_fitness(value: float):
    return None if not math.isfinite(value) else value


def _decode_fitness(value) -> float:
    return FAILED_FITNESS if value is None else float(value)


def write_checkpoint(path: Path, schema: GenomeSchema, config: GaConfig, generation: int,
                     population: Sequence[Individual], trace: Sequence[float], cache: FitnessCache,
                     elapsed_seconds: float = 0.0):
    state = {
        'schema': schema.names,
        'config': {key: value for key, value in asdict(config).items() if key != 'n_jobs'},
        'generation': generation,
        'population': [list(individual.genes) for individual in population],
        'fitness': [_encode_fitness(individual.fitness) for individual in population],
        'trace': [_encode_fitness(value) for value in trace],
        'cache': [[list(genes), _encode_fitness(value)] for genes, value in cache.values.items()],
        'evaluations': cache.evaluations,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scratch = path.with_suffix('.tmp')
    scratch.write_text(json.dumps(state, indent=1), encoding='utf-8')
    scratch.replace(path)
    elapsed_path(path).write_text(f'{elapsed_seconds!r}\n', encoding='utf-8')


def elapsed_path(checkpoint: Union[str, Path]) -> Path:
    """Sidecar holding the wall-clock seconds spent up to the last checkpoint."""
    return Path(checkpoint).with_suffix('.seconds')


def read_elapsed(checkpoint: Union[str, Path]) -> float:
    path = elapsed_path(checkpoint)
    if not path.exists():
        return 0.0
    return float(path.read_text(encoding='utf-8'))


def read_checkpoint(path: Path, schema: GenomeSchema, config: GaConfig) -> dict:
    state = json.loads(Path(path).read_text(encoding='utf-8'))
    expected = {key: value for key, value in asdict(config).items() if key != 'n_jobs'}
    if state['schema'] != schema.names or state['config'] != expected:
        raise GenomeError(f'checkpoint {path} was written for a different schema or configuration')
    return state


def evolve(schema: GenomeSchema, config: GaConfig, task: Callable,
           checkpoint: Optional[Union[str, Path]] = None, resume: bool = False,
           progress: bool = False, label: str = 'ga',
           on_generation: Optional[Callable[[int, Sequence[Individual]], None]] = None) -> GaRunResult:
    """Run the elitist generational loop for `config.generations` populations.

    Args:
        schema: Gene layout; `task` receives genomes decoded against it.
        config: Population size, generation count, operator rates and seed.
        task: Callable mapping decoded genes to a fitness (lower is fitter).
        checkpoint: JSON file rewritten after every generation.
        resume: Continue from `checkpoint` when it exists. Wall time carries on
            from the seconds recorded beside the checkpoint.
        on_generation: Called with the generation index and its evaluated
            population after every generation.

    Returns:
        GaRunResult: best individual, best-so-far fitness per generation, wall
        time, number of distinct genomes evaluated and the cache spot-check.
    """
    started = time.perf_counter()
    cache = FitnessCache(task, schema, n_jobs=config.n_jobs)
    trace = []
    first_generation = 0
    population = None
    prior_seconds = 0.0

    if resume and checkpoint is not None and Path(checkpoint).exists():
        state = read_checkpoint(checkpoint, schema, config)
        cache.values = {tuple(genes): _decode_fitness(value) for genes, value in state['cache']}
        cache.evaluations = state['evaluations']
        population = [Individual(tuple(genes), _decode_fitness(value))
                      for genes, value in zip(state['population'], state['fitness'])]
        trace = [_decode_fitness(value) for value in state['trace']]
        first_generation = state['generation'] + 1
        prior_seconds = read_elapsed(checkpoint)
        logger.info('%s: resuming at generation %d of %d', label, first_generation, config.generations)

    generations = range(first_generation, config.generations)
    for generation in tqdm(generations, desc=label, disable=not progress, leave=False):
        if generation == 0:
            candidates = init_population(schema, config)
        else:
            candidates = next_generation(_ranked(population), schema, config, generation)
        population = cache.evaluate(candidates)
        best = min(individual.fitness for individual in population)
        trace.append(min(best, trace[-1]) if trace else best)
        logger.debug('%s: generation %d best fitness %.6g', label, generation, trace[-1])
        if on_generation is not None:
            on_generation(generation, population)
        if checkpoint is not None:
            write_checkpoint(checkpoint, schema, config, generation, population, trace, cache,
                             elapsed_seconds=prior_seconds + time.perf_counter() - started)

    best = _ranked(population)[0]
    fresh = _safe_fitness(task, schema, best.genes)
    verified = fresh == best.fitness or math.isclose(fresh, best.fitness, rel_tol=1e-9)
    if not verified:
        logger.warning('%s: cached fitness %.6g differs from fresh evaluation %.6g', label, best.fitness, fresh)
    wall_time = prior_seconds + time.perf_counter() - started
    logger.info('%s: best fitness %.6g after %d generations in %.2f s', label, best.fitness, len(trace), wall_time)
    return GaRunResult(
        best=best,
        trace=tuple(trace),
        wall_time_seconds=wall_time,
        evaluations=cache.evaluations,
        cache_verified=verified,
        schema_names=tuple(schema.names),
    )
