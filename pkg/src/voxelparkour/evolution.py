"""Generational GA over fixed-topology genomes.

Tournament selection sized from the population, elitism, per-gene Gaussian
mutation, and a plateau schedule that doubles the mutation rate and sigma
when the champion stops improving.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .policy import PARAMETER_COUNT, Genome, glorot_init
from .world import CdrConfig, Course, generate_course, should_regenerate

log = logging.getLogger(__name__)

# stream tags for derived seeds
_INIT, _COURSE, _EVAL = 0, 1, 2


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    elite_count: int = 5
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    plateau_delta: float = 50.0
    plateau_patience: int = 3
    double_sigma: bool = True
    trials_per_genome: int = 3
    max_generations: int = 200
    early_stop_courses: int = 0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 1:
            raise ValueError("ga.population_size must be >= 1")
        if not 1 <= self.elite_count < self.population_size:
            raise ValueError(
                f"ga.elite_count must lie in [1, population_size), got {self.elite_count}"
            )
        if not 0 < self.mutation_rate <= 1:
            raise ValueError(f"ga.mutation_rate must lie in (0, 1], got {self.mutation_rate}")
        if not self.mutation_sigma > 0:
            raise ValueError(f"ga.mutation_sigma must be > 0, got {self.mutation_sigma}")
        if self.plateau_patience < 1:
            raise ValueError("ga.plateau_patience must be >= 1")
        if self.trials_per_genome < 1 or self.max_generations < 1:
            raise ValueError("ga.trials_per_genome and ga.max_generations must be >= 1")
        if self.early_stop_courses < 0:
            raise ValueError("ga.early_stop_courses must be >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("ga.rng_seed must be a 64-bit unsigned integer")


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_genome_id: str
    best_reached_goal: bool
    current_mutation_rate: float
    current_mutation_sigma: float
    plateau_counter: int
    course_id: str
    cumulative_deaths: int
    regenerated: bool
    episodes_run: int

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(*words: int) -> int:
    """64-bit seed that depends only on ``words``, never on call order."""
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint64)[0])


def tournament_size(n: int) -> int:
    """``round(2 + sqrt(n) / 2)``, half away from zero, clamped to ``n``."""
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    return min(n, math.floor(2.0 + math.sqrt(n) / 2.0 + 0.5))


def select_parent(population: Sequence[tuple[Genome, float]], rng: np.random.Generator) -> Genome:
    n = len(population)
    if n == 0:
        raise ValueError("cannot select from an empty population")
    entrants = rng.choice(n, size=tournament_size(n), replace=False)
    winner = min(entrants, key=lambda i: (-population[i][1], i))
    return population[winner][0]


def mutate(parent: Genome, rate: float, sigma: float, rng: np.random.Generator) -> Genome:
    mask = rng.random(PARAMETER_COUNT) < rate
    noise = rng.normal(0.0, sigma, PARAMETER_COUNT)
    params = np.where(mask, parent.parameters + noise, parent.parameters)
    return Genome(params, generation=parent.generation, course_id=parent.course_id)


def adapt_mutation(
    history: Sequence[float],
    current_rate: float,
    current_sigma: float,
    config: GaConfig,
) -> tuple[float, float]:
    """Next ``(rate, sigma)`` from the champion's recent fitness, oldest first."""
    if len(history) < 2:
        return current_rate, current_sigma
    gains = np.diff(np.asarray(history, dtype=np.float64))
    if gains[-1] > config.plateau_delta:
        return config.mutation_rate, config.mutation_sigma
    recent = gains[-config.plateau_patience :]
    if len(recent) == config.plateau_patience and np.all(recent <= config.plateau_delta):
        sigma = current_sigma * 2 if config.double_sigma else current_sigma
        return min(current_rate * 2, 1.0), sigma
    return current_rate, current_sigma


def elite_indices(fitnesses: Sequence[float], count: int) -> list[int]:
    return sorted(range(len(fitnesses)), key=lambda i: (-fitnesses[i], i))[:count]


def evolve_generation(
    population: Sequence[tuple[Genome, float]],
    config: GaConfig,
    rng: np.random.Generator,
    rate: float | None = None,
    sigma: float | None = None,
    generation: int | None = None,
) -> list[Genome]:
    rate = config.mutation_rate if rate is None else rate
    sigma = config.mutation_sigma if sigma is None else sigma
    fitnesses = [f for _, f in population]
    nxt = [population[i][0] for i in elite_indices(fitnesses, config.elite_count)]
    while len(nxt) < config.population_size:
        child = mutate(select_parent(population, rng), rate, sigma, rng)
        if generation is not None:
            child = child.with_metadata(generation=generation)
        nxt.append(child)
    return nxt


class FixedCourse:
    """Course source that always serves the same course."""

    regenerates = False

    def __init__(self, course: Course):
        self._course = course

    def course(self, index: int) -> Course:
        return self._course


class CdrCourses:
    """Course source for continual domain randomization.

    Regeneration ``k`` of a run seeded ``run_seed`` always yields the same
    course, so resumed or repeated runs see the same curriculum.
    """

    regenerates = True

    def __init__(self, config: CdrConfig, run_seed: int, cell_elevation: int = 64):
        self.config = config
        self.run_seed = run_seed
        self.cell_elevation = cell_elevation

    def course(self, index: int) -> Course:
        return generate_course(
            self.config, derive_seed(self.run_seed, _COURSE, index), self.cell_elevation
        )


@dataclass
class EvolutionResult:
    best: Genome
    records: list[GenerationRecord] = field(default_factory=list)
    final_course: Course | None = None

    @property
    def reached_goal(self) -> bool:
        return bool(self.records) and self.records[-1].best_reached_goal

    @property
    def first_success(self) -> int | None:
        return next((r.generation for r in self.records if r.best_reached_goal), None)


def _evaluate_one(args):
    evaluator, genome, course, trials, seed, record = args
    return evaluator(genome, course, trials, seed, record)


def run_evolution(
    config: GaConfig,
    course_source,
    evaluator: Callable,
    *,
    on_generation: Callable[[GenerationRecord], None] | None = None,
    workers: int = 1,
) -> EvolutionResult:
    """Evolve a population until ``max_generations`` or the early-stop rule.

    ``evaluator(genome, course, trials, base_seed, best_record_ticks)`` must
    return an object with ``mean_fitness``, ``deaths``, ``successes``,
    ``trials``, ``episodes_run`` and ``best_completion_tick``.  Each
    (generation, genome) evaluation gets its own derived seed, so results do
    not depend on ``workers``.
    """
    rng = np.random.default_rng(derive_seed(config.rng_seed, 3))
    population = [glorot_init(derive_seed(config.rng_seed, _INIT, i)) for i in range(config.population_size)]
    rate, sigma = config.mutation_rate, config.mutation_sigma
    history: list[float] = []
    plateau = 0
    course_index = 0
    course = course_source.course(course_index)
    deaths = 0
    record_ticks: int | None = None
    streak = 0
    records: list[GenerationRecord] = []
    best: Genome | None = None

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for gen in range(config.max_generations):
            jobs = [
                (evaluator, g, course, config.trials_per_genome,
                 derive_seed(config.rng_seed, _EVAL, gen, i), record_ticks)
                for i, g in enumerate(population)
            ]
            try:
                if pool is None:
                    summaries = []
                    for i, job in enumerate(jobs):
                        try:
                            summaries.append(_evaluate_one(job))
                        except Exception as exc:
                            raise EvolutionError(
                                f"evaluation failed in generation {gen} for genome g{gen}-i{i}: {exc}"
                            ) from exc
                else:
                    summaries = list(pool.map(_evaluate_one, jobs))
            except EvolutionError:
                raise
            except Exception as exc:
                raise EvolutionError(f"evaluation failed in generation {gen}: {exc}") from exc

            fitnesses = [s.mean_fitness for s in summaries]
            champ = elite_indices(fitnesses, 1)[0]
            champ_summary = summaries[champ]
            champ_ok = champ_summary.successes == champ_summary.trials
            best = population[champ].with_metadata(
                generation=gen, fitness=fitnesses[champ], course_id=course.course_id
            )
            if champ_summary.best_completion_tick is not None and champ_ok:
                if record_ticks is None or champ_summary.best_completion_tick < record_ticks:
                    record_ticks = champ_summary.best_completion_tick

            history.append(fitnesses[champ])
            window = history[-(config.plateau_patience + 1):]
            if len(window) >= 2:
                plateau = plateau + 1 if window[-1] - window[-2] <= config.plateau_delta else 0
            deaths += sum(s.deaths for s in summaries)
            regenerate = course_source.regenerates and should_regenerate(deaths, course_source.config)

            record = GenerationRecord(
                generation=gen,
                best_fitness=fitnesses[champ],
                mean_fitness=float(np.mean(fitnesses)),
                best_genome_id=f"g{gen}-i{champ}",
                best_reached_goal=champ_ok,
                current_mutation_rate=rate,
                current_mutation_sigma=sigma,
                plateau_counter=plateau,
                course_id=course.course_id,
                cumulative_deaths=deaths,
                regenerated=regenerate,
                episodes_run=sum(s.episodes_run for s in summaries),
            )
            records.append(record)
            if on_generation is not None:
                on_generation(record)
            log.info(
                "gen %d best %.2f mean %.2f goal=%s rate %.3g sigma %.3g course %s",
                gen, record.best_fitness, record.mean_fitness, champ_ok, rate, sigma, course.course_id,
            )

            streak = streak + 1 if champ_ok else 0
            if config.early_stop_courses and streak >= config.early_stop_courses:
                break
            if gen == config.max_generations - 1:
                break

            rate, sigma = adapt_mutation(window, rate, sigma, config)
            if plateau >= config.plateau_patience:
                # a doubling consumes the plateau; the next one needs a fresh run of flat generations
                history = history[-1:]
                plateau = 0

            population = evolve_generation(
                list(zip(population, fitnesses)), config, rng, rate, sigma, generation=gen + 1
            )
            if regenerate:
                course_index += 1
                course = course_source.course(course_index)
                deaths = 0
                record_ticks = None
    finally:
        if pool is not None:
            pool.shutdown()

    return EvolutionResult(best=best, records=records, final_course=course)
