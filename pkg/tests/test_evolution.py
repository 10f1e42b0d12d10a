import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from voxelparkour.episode import EpisodeEvaluator, TrialSummary
from voxelparkour.evolution import (
    CdrCourses,
    EvolutionError,
    FixedCourse,
    GaConfig,
    adapt_mutation,
    derive_seed,
    evolve_generation,
    mutate,
    run_evolution,
    select_parent,
    tournament_size,
)
from voxelparkour.policy import PARAMETER_COUNT, Genome, glorot_init
from voxelparkour.world import CdrConfig, Course


def closed_form_size(n):
    exact = Decimal(2) + Decimal(n).sqrt() / 2
    return min(n, int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP)))


def pop_of(fitnesses):
    return [(Genome(np.full(PARAMETER_COUNT, float(i))), f) for i, f in enumerate(fitnesses)]


@dataclass
class TargetEvaluator:
    """Fitness peaks at parameters all equal to ``target``; counts a death below ``floor``."""

    target: float = 0.5
    floor: float = -1e9

    def __call__(self, genome, course, trials, base_seed, best_record_ticks=None):
        f = -float(np.abs(genome.parameters - self.target).mean()) * 100
        return TrialSummary(f, trials, 1, 0, trials if f < self.floor else 0, None)


@dataclass
class FailingEvaluator:
    bad_generation: int

    def __call__(self, genome, course, trials, base_seed, best_record_ticks=None):
        if genome.generation == self.bad_generation:
            raise RuntimeError("simulated crash")
        return TargetEvaluator()(genome, course, trials, base_seed)


COURSE = Course("SSSBB..BBB...BBG")


class TestTournamentSize:
    @pytest.mark.parametrize("n,k", [(1, 1), (2, 2), (4, 3), (16, 4), (64, 6), (100, 7)])
    def test_examples(self, n, k):
        assert tournament_size(n) == k

    def test_exhaustive_against_decimal_oracle(self):
        assert all(tournament_size(n) == closed_form_size(n) for n in range(1, 10_001))

    def test_half_cases_round_up(self):
        # sqrt(n)/2 ends in .5 exactly when sqrt(n) is an odd integer
        for r in (1, 3, 5, 7, 99):
            assert tournament_size(r * r) == min(r * r, 2 + (r + 1) // 2)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            tournament_size(0)


class TestSelection:
    def test_single(self):
        pop = pop_of([3.0])
        assert select_parent(pop, np.random.default_rng(0)) is pop[0][0]

    def test_tournament_of_everyone_returns_best(self):
        pop = pop_of([1.0, 9.0, 4.0])
        assert select_parent(pop, np.random.default_rng(0)) is pop[1][0]

    def test_ties_go_to_lowest_index(self):
        pop = pop_of([5.0, 5.0])
        for seed in range(20):
            assert select_parent(pop, np.random.default_rng(seed)) is pop[0][0]

    def test_matches_combinatorial_distribution(self):
        n = 10
        k = tournament_size(n)
        fitnesses = [float(i + 1) for i in range(n)]
        pop = pop_of(fitnesses)
        ids = {id(g): i for i, (g, _) in enumerate(pop)}
        rng = np.random.default_rng(123)
        draws = 100_000
        counts = np.zeros(n)
        for _ in range(draws):
            counts[ids[id(select_parent(pop, rng))]] += 1
        # individual j wins iff it is drawn and the other k-1 come from the j weaker ones
        expected = np.array([math.comb(j, k - 1) / math.comb(n, k) for j in range(n)])
        assert expected.sum() == pytest.approx(1.0)
        nonzero = expected > 0
        assert np.all(counts[~nonzero] == 0)
        _, p = stats.chisquare(counts[nonzero], expected[nonzero] * draws)
        assert p > 0.01
        assert np.all(np.diff(counts[nonzero]) > 0)


class TestMutate:
    def test_rate_zero_is_identity(self):
        g = glorot_init(0)
        child = mutate(g, 0.0, 1.0, np.random.default_rng(0))
        assert np.array_equal(child.parameters, g.parameters)

    def test_tiny_sigma(self):
        g = glorot_init(0)
        child = mutate(g, 1.0, 1e-12, np.random.default_rng(0))
        assert np.allclose(child.parameters, g.parameters, atol=1e-10)
        assert not np.array_equal(child.parameters, g.parameters)

    def test_fraction_mutated(self):
        g = glorot_init(0)
        rng = np.random.default_rng(1)
        changed = sum(int(np.sum(mutate(g, 0.1, 0.2, rng).parameters != g.parameters)) for _ in range(9))
        assert 0.08 <= changed / (9 * PARAMETER_COUNT) <= 0.12

    def test_fitness_cleared(self):
        g = glorot_init(0).with_metadata(fitness=10.0, course_id="c")
        child = mutate(g, 0.5, 0.1, np.random.default_rng(0))
        assert child.fitness is None
        assert g.fitness == 10.0


class TestAdaptMutation:
    cfg = GaConfig(mutation_rate=0.1, mutation_sigma=0.2)

    def test_plateau_doubles(self):
        assert adapt_mutation([0, 10, 30, 60], 0.1, 0.2, self.cfg) == (0.2, 0.4)

    def test_big_gain_restores(self):
        assert adapt_mutation([0, 10, 20, 80], 0.4, 0.8, self.cfg) == (0.1, 0.2)

    def test_not_yet_plateau(self):
        assert adapt_mutation([0, 60, 70, 80], 0.1, 0.2, self.cfg) == (0.1, 0.2)

    def test_short_history(self):
        assert adapt_mutation([5.0], 0.3, 0.7, self.cfg) == (0.3, 0.7)
        assert adapt_mutation([], 0.3, 0.7, self.cfg) == (0.3, 0.7)

    def test_rate_capped(self):
        assert adapt_mutation([0, 0, 0, 0], 0.8, 1.0, self.cfg) == (1.0, 2.0)

    def test_sigma_fixed_when_configured(self):
        cfg = GaConfig(double_sigma=False)
        assert adapt_mutation([0, 0, 0, 0], 0.1, 0.2, cfg) == (0.2, 0.2)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=6))
    def test_schedule_bounds(self, history):
        rate, sigma = 0.1, 0.2
        for end in range(2, len(history) + 1):
            rate, sigma = adapt_mutation(history[:end], rate, sigma, self.cfg)
            assert 0 < rate <= 1 and sigma > 0
            if history[end - 1] - history[end - 2] > 50:
                assert (rate, sigma) == (0.1, 0.2)


class TestEvolveGeneration:
    def test_size_and_elites(self):
        cfg = GaConfig(population_size=8, elite_count=3)
        pop = pop_of([3.0, 9.0, 1.0, 9.0, 7.0, 0.0, 2.0, 5.0])
        nxt = evolve_generation(pop, cfg, np.random.default_rng(0))
        assert len(nxt) == 8
        assert [g for g in nxt[:3]] == [pop[1][0], pop[3][0], pop[4][0]]

    def test_one_child_at_boundary(self):
        cfg = GaConfig(population_size=5, elite_count=4)
        pop = pop_of([1.0, 2.0, 3.0, 4.0, 5.0])
        nxt = evolve_generation(pop, cfg, np.random.default_rng(0))
        originals = {id(g) for g, _ in pop}
        assert sum(id(g) not in originals for g in nxt) == 1

    def test_rate_zero_reuses_parents(self):
        cfg = GaConfig(population_size=6, elite_count=2)
        pop = pop_of([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        nxt = evolve_generation(pop, cfg, np.random.default_rng(0), rate=0.0)
        parent_params = {g.parameters[0] for g, _ in pop}
        assert all(np.all(g.parameters == g.parameters[0]) and g.parameters[0] in parent_params for g in nxt)


class TestRunEvolution:
    def test_single_generation(self):
        cfg = GaConfig(population_size=6, elite_count=1, max_generations=1, trials_per_genome=1)
        result = run_evolution(cfg, FixedCourse(COURSE), TargetEvaluator())
        assert len(result.records) == 1
        initial = [glorot_init(derive_seed(0, 0, i)) for i in range(6)]
        scores = [TargetEvaluator()(g, COURSE, 1, 0).mean_fitness for g in initial]
        assert result.best.fitness == max(scores)
        assert np.array_equal(result.best.parameters, initial[int(np.argmax(scores))].parameters)

    def test_deterministic(self):
        cfg = GaConfig(population_size=8, elite_count=2, max_generations=6, trials_per_genome=1, rng_seed=4)
        a = run_evolution(cfg, FixedCourse(COURSE), EpisodeEvaluator())
        b = run_evolution(cfg, FixedCourse(COURSE), EpisodeEvaluator())
        assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
        assert np.array_equal(a.best.parameters, b.best.parameters)

    def test_workers_do_not_change_results(self):
        cfg = GaConfig(population_size=8, elite_count=2, max_generations=4, trials_per_genome=1, rng_seed=2)
        a = run_evolution(cfg, FixedCourse(COURSE), EpisodeEvaluator())
        b = run_evolution(cfg, FixedCourse(COURSE), EpisodeEvaluator(), workers=2)
        assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]

    def test_elitism_monotone_on_fixed_course(self):
        cfg = GaConfig(population_size=12, elite_count=2, max_generations=15, trials_per_genome=1, rng_seed=1)
        result = run_evolution(cfg, FixedCourse(COURSE), EpisodeEvaluator())
        best = [r.best_fitness for r in result.records]
        assert all(b >= a for a, b in zip(best, best[1:]))

    def test_records_and_schedule(self):
        cfg = GaConfig(population_size=10, elite_count=2, max_generations=30, trials_per_genome=1)
        seen = []
        result = run_evolution(cfg, FixedCourse(COURSE), TargetEvaluator(), on_generation=seen.append)
        assert seen == result.records
        assert [r.generation for r in seen] == list(range(30))
        for r in seen:
            assert 0 < r.current_mutation_rate <= 1
            assert r.best_fitness >= r.mean_fitness
            assert r.episodes_run == 10
            assert r.best_genome_id.startswith(f"g{r.generation}-i")
        # the target evaluator improves slowly, so the schedule must have doubled at least once
        assert max(r.current_mutation_rate for r in seen) > cfg.mutation_rate

    def test_population_size_constant(self):
        cfg = GaConfig(population_size=7, elite_count=3, max_generations=5, trials_per_genome=2)
        result = run_evolution(cfg, FixedCourse(COURSE), TargetEvaluator())
        assert all(r.episodes_run == 7 for r in result.records)

    def test_evaluator_failure_names_generation_and_genome(self):
        cfg = GaConfig(population_size=6, elite_count=1, max_generations=5, trials_per_genome=1)
        with pytest.raises(EvolutionError, match=r"generation 2 .*g2-i1"):
            run_evolution(cfg, FixedCourse(COURSE), FailingEvaluator(bad_generation=2))

    def test_cdr_regenerates_after_deaths(self):
        cdr = CdrConfig(death_threshold=3)
        cfg = GaConfig(population_size=6, elite_count=1, max_generations=4, trials_per_genome=1)
        # every genome "dies", so each generation crosses the threshold
        result = run_evolution(cfg, CdrCourses(cdr, 0), TargetEvaluator(floor=1.0))
        ids = [r.course_id for r in result.records]
        assert len(set(ids)) == 4
        assert all(r.regenerated for r in result.records)
        assert ids == [CdrCourses(cdr, 0).course(k).course_id for k in range(4)]

    def test_early_stop(self):
        cfg = GaConfig(population_size=20, elite_count=2, max_generations=60, trials_per_genome=1,
                       early_stop_courses=2)
        result = run_evolution(cfg, FixedCourse(Course("SSSBBBBG")), EpisodeEvaluator())
        # a flat course is solved by the forward-running default; stop after two goal generations
        assert len(result.records) == 2
        assert result.reached_goal and result.first_success == 0
