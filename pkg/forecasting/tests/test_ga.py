import math
from pathlib import Path
import tempfile
import time

from django.test import SimpleTestCase
import numpy as np

from forecasting.data import join_exogenous
from forecasting.evaluation import forecast_holdout, ModelKind, rmse
from forecasting.exceptions import GenomeError, ModelError
from forecasting.forest import ForestParams
from forecasting.ga import (
    crossover,
    decode_genome,
    evaluate_fitness,
    evolve,
    FitnessCache,
    GaConfig,
    GeneKind,
    GeneSpec,
    GenomeSchema,
    HoldoutTask,
    Individual,
    init_population,
    mutate,
    read_elapsed,
    RF_SCHEMA,
    schema_for,
    SVR_SCHEMA,
)
from forecasting.models import FeatureKind, MonthlySeries
from forecasting.svr import SvrParams

X_SCHEMA = GenomeSchema((GeneSpec('x', GeneKind.INT, 0, 20),))


def quadratic(genes):
    return float((genes['x'] - 7) ** 2)


def forest_distance(genes):
    return float(abs(genes['n_estimators'] - 120) + abs(genes['max_depth'] - 90) + genes['lags'])


class CountingTask:
    def __init__(self, fitness=quadratic, interrupt_after=None):
        self.fitness = fitness
        self.calls = 0
        self.interrupt_after = interrupt_after

    def __call__(self, genes):
        self.calls += 1
        if self.interrupt_after is not None and self.calls > self.interrupt_after:
            raise KeyboardInterrupt
        return self.fitness(genes)


class SchemaTests(SimpleTestCase):
    def test_model_schemas(self):
        self.assertEqual(RF_SCHEMA.names, ['n_estimators', 'max_depth', 'lags'])
        self.assertEqual(SVR_SCHEMA.names, ['kernel', 'epsilon', 'C', 'lags'])
        self.assertIs(schema_for('svr'), SVR_SCHEMA)
        with self.assertRaises(GenomeError):
            schema_for('ses')

    def test_invalid_genes(self):
        with self.assertRaises(GenomeError):
            GeneSpec('x', GeneKind.INT, 5, 5)
        with self.assertRaises(GenomeError):
            GeneSpec('k', GeneKind.CATEGORICAL, choices=('a', 'a'))
        with self.assertRaises(GenomeError):
            GenomeSchema((GeneSpec('x', GeneKind.INT, 0, 1), GeneSpec('x', GeneKind.INT, 0, 1)))

    def test_validate(self):
        RF_SCHEMA.validate((100, 60, 0))
        for genes in [(4, 60, 0), (100, 201, 0), (100, 60, 21), (100, 60.5, 0), (100, 60)]:
            with self.assertRaises(GenomeError):
                RF_SCHEMA.validate(genes)
        with self.assertRaises(GenomeError):
            SVR_SCHEMA.validate(('linear', 0.1, 10.0, 2))

    def test_decode_genome(self):
        params, lags = decode_genome('rf', {'n_estimators': 30, 'max_depth': 80, 'lags': 4}, seed=9)
        self.assertEqual(params, ForestParams(n_estimators=30, max_depth=80, seed=9))
        self.assertEqual(lags, 4)
        params, lags = decode_genome('svr', {'kernel': 'sigmoid', 'epsilon': 0.2, 'C': 12.0, 'lags': 0})
        self.assertIsInstance(params, SvrParams)
        self.assertEqual((str(params.kernel.kind), params.C, params.epsilon, lags), ('sigmoid', 12.0, 0.2, 0))

    def test_config_validation(self):
        with self.assertRaises(GenomeError):
            GaConfig(population_size=1)
        with self.assertRaises(GenomeError):
            GaConfig(generations=0)
        with self.assertRaises(GenomeError):
            GaConfig(mutation_probability=1.5)
        self.assertEqual(GaConfig(population_size=20, elite_fraction=0.1).elite_count, 2)
        self.assertEqual(GaConfig(population_size=4, elite_fraction=0.1).elite_count, 1)


class OperatorTests(SimpleTestCase):
    def test_init_population_in_bounds(self):
        config = GaConfig(population_size=200, seed=5)
        population = init_population(SVR_SCHEMA, config)
        self.assertEqual(len(population), 200)
        for individual in population:
            SVR_SCHEMA.validate(individual.genes)
        self.assertEqual(init_population(SVR_SCHEMA, config), population)

    def test_single_int_gene(self):
        schema = GenomeSchema((GeneSpec('n', GeneKind.INT, 5, 200),))
        values = [individual.genes[0] for individual in init_population(schema, GaConfig(population_size=500))]
        self.assertTrue(all(isinstance(value, int) and 5 <= value <= 200 for value in values))
        self.assertGreater(len(set(values)), 100)

    def test_crossover_of_identical_parents(self):
        parent = Individual((120, 75, 3))
        child = crossover(parent, parent, np.random.default_rng(0))
        self.assertEqual(child.genes, parent.genes)

    def test_crossover_draws_from_parents(self):
        rng = np.random.default_rng(1)
        a, b = Individual((5, 50, 0)), Individual((200, 200, 20))
        for _ in range(100):
            child = crossover(a, b, rng)
            self.assertTrue(all(gene in pair for gene, pair in zip(child.genes, zip(a.genes, b.genes))))

    def test_crossover_is_fair(self):
        rng = np.random.default_rng(2)
        a, b = Individual((0,)), Individual((1,))
        share = np.mean([crossover(a, b, rng).genes[0] for _ in range(10000)])
        self.assertAlmostEqual(share, 0.5, delta=0.02)

    def test_crossover_length_mismatch(self):
        with self.assertRaises(GenomeError):
            crossover(Individual((1,)), Individual((1, 2)), np.random.default_rng(0))

    def test_mutation_factor(self):
        schema = GenomeSchema((GeneSpec('n', GeneKind.INT, 5, 200),))
        rng = np.random.default_rng(3)
        for _ in range(500):
            value = mutate(Individual((100,)), schema, 1.0, rng).genes[0]
            self.assertTrue(50 <= value <= 120)
            self.assertLessEqual(mutate(Individual((200,)), schema, 1.0, rng).genes[0], 200)

    def test_mutation_probability_zero(self):
        rng = np.random.default_rng(4)
        individual = Individual(('rbf', 0.5, 100.0, 2))
        for _ in range(100):
            self.assertEqual(mutate(individual, SVR_SCHEMA, 0.0, rng), individual)

    def test_categorical_mutation_stays_in_choices(self):
        rng = np.random.default_rng(5)
        schema = GenomeSchema((GeneSpec('kernel', GeneKind.CATEGORICAL, choices=('poly', 'sigmoid', 'rbf')),))
        kernels = {mutate(Individual(('rbf',)), schema, 1.0, rng).genes[0] for _ in range(100)}
        self.assertEqual(kernels, {'poly', 'sigmoid', 'rbf'})

    def test_zero_lags_gene_stays_zero_under_mutation(self):
        schema = GenomeSchema((GeneSpec('lags', GeneKind.INT, 0, 20),))
        rng = np.random.default_rng(6)
        self.assertEqual({mutate(Individual((0,)), schema, 1.0, rng).genes[0] for _ in range(50)}, {0})


class FitnessTests(SimpleTestCase):
    def test_cache_evaluates_each_genome_once(self):
        task = CountingTask()
        cache = FitnessCache(task, X_SCHEMA)
        scored = cache.evaluate([Individual((3,)), Individual((3,)), Individual((9,))])
        self.assertEqual([individual.fitness for individual in scored], [16.0, 16.0, 4.0])
        cache.evaluate([Individual((9,))])
        self.assertEqual((task.calls, cache.evaluations), (2, 2))
        self.assertIn((3,), cache)

    def test_failing_evaluation_scores_infinity(self):
        def broken(genes):
            raise ModelError('singular system')

        self.assertEqual(evaluate_fitness(Individual((1,)), broken, X_SCHEMA), math.inf)
        self.assertEqual(evaluate_fitness(Individual((1,)), lambda genes: math.nan, X_SCHEMA), math.inf)

    def test_holdout_task_matches_forecast(self):
        rng = np.random.default_rng(7)
        months = 36
        activity = MonthlySeries('2020-01', 50 + 10 * np.sin(np.arange(months)) + rng.normal(0, 1, months),
                                 'hours', 'courses', FeatureKind.ACTIVITY)
        target = MonthlySeries('2020-01', 300 + 3 * activity.values + rng.normal(0, 4, months), 'm3', 'water')
        table = join_exogenous(target, [activity])
        genes = {'n_estimators': 8, 'max_depth': 50, 'lags': 2}
        fitness = HoldoutTask(ModelKind.RF, table, 12, 3)(genes)
        run, _ = forecast_holdout('rf', ForestParams(n_estimators=8, max_depth=50, seed=3), table, 2)
        self.assertAlmostEqual(fitness, rmse(run.actuals, run.predictions) ** 2, delta=1e-9 * max(1.0, fitness))


class EvolveTests(SimpleTestCase):
    def test_finds_minimum(self):
        result = evolve(X_SCHEMA, GaConfig(population_size=100, generations=50, seed=1), quadratic)
        self.assertEqual(result.best.genes, (7,))
        self.assertEqual(result.best.fitness, 0.0)
        self.assertEqual(result.best_genes, {'x': 7})
        self.assertEqual(result.generations, 50)
        self.assertTrue(result.cache_verified)

    def test_single_generation(self):
        config = GaConfig(population_size=10, generations=1, seed=2)
        result = evolve(X_SCHEMA, config, quadratic)
        initial = [quadratic({'x': individual.genes[0]}) for individual in init_population(X_SCHEMA, config)]
        self.assertEqual(result.trace, (min(initial),))

    def test_trace_is_monotone(self):
        for seed in range(100):
            generation_best = []
            result = evolve(RF_SCHEMA, GaConfig(population_size=8, generations=10, seed=seed), forest_distance,
                            on_generation=lambda _, population: generation_best.append(
                                min(individual.fitness for individual in population)))
            self.assertEqual(list(result.trace), list(np.minimum.accumulate(generation_best)))
            self.assertTrue(all(later <= earlier for earlier, later in zip(result.trace, result.trace[1:])))
            self.assertEqual(result.trace[-1], result.best.fitness)

    def test_every_generation_within_bounds(self):
        edge_seekers = [
            (RF_SCHEMA, lambda genes: -genes['n_estimators'] + genes['max_depth'] - genes['lags']),
            (SVR_SCHEMA, lambda genes: -genes['C'] + genes['epsilon'] - genes['lags']),
        ]
        for schema, fitness in edge_seekers:
            for seed in range(5):
                seen = []

                def check(generation, population):
                    seen.append(generation)
                    self.assertEqual(len(population), 20)
                    for individual in population:
                        schema.validate(individual.genes)

                evolve(schema, GaConfig(population_size=20, generations=30, seed=seed), fitness,
                       on_generation=check)
                self.assertEqual(seen, list(range(30)))

    def test_distinct_genomes_counted(self):
        task = CountingTask()
        result = evolve(X_SCHEMA, GaConfig(population_size=30, generations=10, seed=4), task)
        self.assertLessEqual(result.evaluations, 21)
        self.assertEqual(task.calls, result.evaluations + 1)

    def test_failures_never_win(self):
        def partly_broken(genes):
            if genes['x'] > 10:
                raise ModelError('diverged')
            return quadratic(genes)

        result = evolve(X_SCHEMA, GaConfig(population_size=20, generations=5, seed=5), partly_broken)
        self.assertLessEqual(result.best.genes[0], 10)
        self.assertTrue(math.isfinite(result.best.fitness))

    def test_same_seed_same_result(self):
        config = GaConfig(population_size=16, generations=8, seed=6)
        first = evolve(SVR_SCHEMA, config, lambda genes: abs(math.log(genes['C'])) + genes['epsilon'])
        second = evolve(SVR_SCHEMA, config, lambda genes: abs(math.log(genes['C'])) + genes['epsilon'])
        self.assertEqual((first.best, first.trace), (second.best, second.trace))

    def test_parallel_matches_serial(self):
        serial = evolve(X_SCHEMA, GaConfig(population_size=20, generations=6, seed=7), quadratic)
        parallel = evolve(X_SCHEMA, GaConfig(population_size=20, generations=6, seed=7, n_jobs=2), quadratic)
        self.assertEqual((serial.best, serial.trace, serial.evaluations),
                         (parallel.best, parallel.trace, parallel.evaluations))

    def test_resume_matches_uninterrupted_run(self):
        config = GaConfig(population_size=20, generations=8, seed=8)
        straight = evolve(RF_SCHEMA, config, forest_distance)
        with tempfile.TemporaryDirectory() as directory:
            checkpoint = Path(directory) / 'checkpoint.json'
            with self.assertRaises(KeyboardInterrupt):
                evolve(RF_SCHEMA, config, CountingTask(forest_distance, interrupt_after=25), checkpoint=checkpoint)
            self.assertTrue(checkpoint.exists())
            resumed = evolve(RF_SCHEMA, config, forest_distance, checkpoint=checkpoint, resume=True)
        self.assertEqual((resumed.best, resumed.trace, resumed.evaluations),
                         (straight.best, straight.trace, straight.evaluations))

    def test_resume_adds_to_recorded_wall_time(self):
        def slow_distance(genes):
            time.sleep(0.01)
            return forest_distance(genes)

        config = GaConfig(population_size=20, generations=4, seed=8)
        with tempfile.TemporaryDirectory() as directory:
            checkpoint = Path(directory) / 'checkpoint.json'
            with self.assertRaises(KeyboardInterrupt):
                evolve(RF_SCHEMA, config, CountingTask(slow_distance, interrupt_after=25), checkpoint=checkpoint)
            recorded = read_elapsed(checkpoint)
            self.assertGreaterEqual(recorded, 0.15)
            self.assertNotIn('elapsed', checkpoint.read_text(encoding='utf-8'))
            resumed = evolve(RF_SCHEMA, config, forest_distance, checkpoint=checkpoint, resume=True)
            self.assertGreaterEqual(resumed.wall_time_seconds, recorded)
            self.assertGreater(read_elapsed(checkpoint), recorded)

    def test_checkpoint_from_other_configuration(self):
        with tempfile.TemporaryDirectory() as directory:
            checkpoint = Path(directory) / 'checkpoint.json'
            evolve(X_SCHEMA, GaConfig(population_size=6, generations=2, seed=1), quadratic, checkpoint=checkpoint)
            with self.assertRaises(GenomeError):
                evolve(X_SCHEMA, GaConfig(population_size=6, generations=2, seed=2), quadratic,
                       checkpoint=checkpoint, resume=True)
