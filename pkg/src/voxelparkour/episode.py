"""Episode rollout, fitness shaping, trial averaging and action-delay injection."""

from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import physics
from .physics import IDLE, ActionCommand, AgentState, PhysicsConfig
from .policy import Genome, forward
from .sensing import SensorConfig, sense


class Termination(str, enum.Enum):
    GOAL = "goal"
    VOID = "void"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class JitterSpec:
    """Action-delivery delay: every command is applied ``delay`` ticks late.

    ``probability < 1`` makes the delay a per-command Bernoulli draw
    (delayed with that probability, on time otherwise).
    """

    delay: int = 0
    probability: float = 1.0

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError(f"jitter delay must be >= 0, got {self.delay}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"jitter probability must lie in [0, 1], got {self.probability}")

    @classmethod
    def none(cls) -> "JitterSpec":
        return cls()

    @classmethod
    def fixed(cls, delay: int) -> "JitterSpec":
        return cls(delay=delay)

    @classmethod
    def bernoulli(cls, probability: float, delay: int) -> "JitterSpec":
        return cls(delay=delay, probability=probability)

    @property
    def stochastic(self) -> bool:
        return self.delay > 0 and 0.0 < self.probability < 1.0

    @property
    def mode(self) -> str:
        if self.delay == 0 or self.probability == 0.0:
            return "none"
        return "bernoulli" if self.stochastic else "fixed"


@dataclass(frozen=True)
class FitnessWeights:
    progress: float = 100.0
    proximity: float = 200.0
    goal: float = 500.0
    record: float = 100.0
    early_death: float = 50.0
    stuck: float = 50.0


@dataclass(frozen=True)
class EpisodeConfig:
    timeout_ticks: int = 400
    stuck_window_ticks: int = 40
    stuck_displacement: float = 0.5
    early_death_ticks: int = 20
    jitter: JitterSpec = JitterSpec()
    weights: FitnessWeights = FitnessWeights()

    def __post_init__(self) -> None:
        if self.timeout_ticks <= 0:
            raise ValueError("episode.timeout_ticks must be > 0")
        if not 0 < self.stuck_window_ticks < self.timeout_ticks:
            raise ValueError("episode.stuck_window_ticks must lie in (0, timeout_ticks)")
        if not 0 < self.early_death_ticks < self.timeout_ticks:
            raise ValueError("episode.early_death_ticks must lie in (0, timeout_ticks)")


@dataclass
class FitnessReport:
    fitness: float
    reached_goal: bool
    termination: Termination
    completion_tick: int | None
    best_progress: float
    final_tick: int
    final_position: tuple[float, float, float]
    stuck: bool = False
    trace: list[dict] | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "fitness": self.fitness,
            "reached_goal": self.reached_goal,
            "termination": self.termination.value,
            "completion_tick": self.completion_tick,
            "best_progress": self.best_progress,
            "final_tick": self.final_tick,
            "final_position": list(self.final_position),
            "stuck": self.stuck,
        }


class DelayLine:
    """FIFO of emitted commands; one command is delivered per tick, in order.

    A command emitted at tick ``t`` with delay ``d`` becomes deliverable at
    ``t + d``.  A late command holds back everything behind it, the way a
    stalled stream holds back later packets.  While nothing is deliverable
    the keys of the last delivered command stay held and the yaw delta is 0;
    before the first delivery the idle command applies.
    """

    def __init__(self, jitter: JitterSpec, rng: np.random.Generator | None = None):
        self.jitter = jitter
        self.rng = rng
        self.queue: deque[tuple[int, ActionCommand]] = deque()
        self.held = IDLE

    def push(self, tick: int, command: ActionCommand) -> None:
        delay = self.jitter.delay
        if self.jitter.stochastic:
            delay = delay if self.rng.random() < self.jitter.probability else 0
        elif self.jitter.probability == 0.0:
            delay = 0
        self.queue.append((tick + delay, command))

    def pop(self, tick: int) -> ActionCommand:
        if self.queue and self.queue[0][0] <= tick:
            self.held = self.queue.popleft()[1]
            return self.held
        held = self.held
        if held.yaw_delta == 0.0:
            return held
        return ActionCommand(held.jump, held.strafe_left, held.strafe_right, 0.0)


def _distance(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def _trace_line(state: AgentState, action: ActionCommand) -> dict:
    x, y, z = state.position
    return {
        "tick": state.tick,
        "x": x,
        "y": y,
        "z": z,
        "yaw": state.yaw,
        "jump": action.jump,
        "strafe_left": action.strafe_left,
        "strafe_right": action.strafe_right,
        "yaw_delta": action.yaw_delta,
        "on_ground": state.on_ground,
    }


def score(
    *,
    weights: FitnessWeights,
    progress_fraction: float,
    d_min: float,
    reached_goal: bool,
    completion_tick: int | None,
    best_record_ticks: int | None,
    timeout_ticks: int,
    early_death: bool,
    stuck: bool,
) -> float:
    fitness = weights.progress * progress_fraction + weights.proximity / (1.0 + d_min)
    if reached_goal:
        fitness += weights.goal
        if best_record_ticks is None or completion_tick <= best_record_ticks:
            fitness += weights.record * (timeout_ticks - completion_tick) / timeout_ticks
    if early_death:
        fitness -= weights.early_death
    if stuck:
        fitness -= weights.stuck
    return fitness


def run_episode(
    genome: Genome,
    course,
    config: EpisodeConfig | None = None,
    physics_config: PhysicsConfig | None = None,
    sensors: SensorConfig | None = None,
    best_record_ticks: int | None = None,
    seed: int | None = None,
    trace: bool = False,
) -> FitnessReport:
    config = config or EpisodeConfig()
    physics_config = physics_config or PhysicsConfig()
    sensors = sensors or SensorConfig(
        episode_timeout_ticks=config.timeout_ticks, velocity_scale=physics_config.sprint_speed
    )
    rng = np.random.default_rng(seed) if config.jitter.stochastic else None
    line = DelayLine(config.jitter, rng)

    goal = course.goal_point
    state = physics.spawn(course, physics_config)
    d0 = _distance(state.position, goal)
    d_min = d0
    window: deque[tuple[float, float]] = deque(maxlen=config.stuck_window_ticks + 1)
    window.append((state.position[0], state.position[2]))
    stuck = False
    lines = [_trace_line(state, IDLE)] if trace else None

    while state.tick < config.timeout_ticks:
        line.push(state.tick, forward(genome, sense(state, course, sensors)))
        action = line.pop(state.tick)
        state = physics.step(state, action, course, physics_config)
        if trace:
            lines.append(_trace_line(state, action))
        d_min = min(d_min, _distance(state.position, goal))
        if state.reached_goal or not state.alive:
            break
        window.append((state.position[0], state.position[2]))
        if not stuck and len(window) == window.maxlen:
            (ax, az), (bx, bz) = window[0], window[-1]
            stuck = math.hypot(bx - ax, bz - az) < config.stuck_displacement

    if state.reached_goal:
        termination = Termination.GOAL
    elif not state.alive:
        termination = Termination.VOID
    else:
        termination = Termination.TIMEOUT
    completion = state.tick if state.reached_goal else None
    progress = (d0 - d_min) / d0 if d0 > 0 else 1.0
    fitness = score(
        weights=config.weights,
        progress_fraction=progress,
        d_min=d_min,
        reached_goal=state.reached_goal,
        completion_tick=completion,
        best_record_ticks=best_record_ticks,
        timeout_ticks=config.timeout_ticks,
        early_death=termination is Termination.VOID and state.tick < config.early_death_ticks,
        stuck=stuck,
    )
    return FitnessReport(
        fitness=fitness,
        reached_goal=state.reached_goal,
        termination=termination,
        completion_tick=completion,
        best_progress=d0 - d_min,
        final_tick=state.tick,
        final_position=state.position,
        stuck=stuck,
        trace=lines,
    )


def dumps_trace(report: FitnessReport) -> str:
    return "".join(json.dumps(row, sort_keys=True) + "\n" for row in report.trace or [])


def trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(trial)]).generate_state(1, np.uint64)[0])


@dataclass
class TrialSummary:
    mean_fitness: float
    trials: int
    episodes_run: int
    successes: int
    deaths: int
    best_completion_tick: int | None

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


def evaluate_trials(
    genome: Genome,
    course,
    trials: int = 1,
    base_seed: int = 0,
    config: EpisodeConfig | None = None,
    physics_config: PhysicsConfig | None = None,
    sensors: SensorConfig | None = None,
    best_record_ticks: int | None = None,
) -> TrialSummary:
    """Run ``trials`` episodes and aggregate them.

    Jitter-free episodes are deterministic, so only one is simulated and its
    result stands for all ``trials``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    config = config or EpisodeConfig()
    stochastic = config.jitter.stochastic
    runs = trials if stochastic else 1
    record = best_record_ticks
    reports = []
    for k in range(runs):
        report = run_episode(
            genome, course, config, physics_config, sensors,
            best_record_ticks=record, seed=trial_seed(base_seed, k),
        )
        reports.append(report)
        if report.completion_tick is not None and (record is None or report.completion_tick < record):
            record = report.completion_tick
    weight = trials // runs
    completions = [r.completion_tick for r in reports if r.completion_tick is not None]
    return TrialSummary(
        mean_fitness=sum(r.fitness for r in reports) / runs,
        trials=trials,
        episodes_run=runs,
        successes=weight * sum(r.reached_goal for r in reports),
        deaths=weight * sum(r.termination is Termination.VOID for r in reports),
        best_completion_tick=min(completions) if completions else None,
    )


def evaluate_averaged(genome: Genome, course, trials: int = 1, base_seed: int = 0, **kwargs) -> float:
    return evaluate_trials(genome, course, trials, base_seed, **kwargs).mean_fitness


@dataclass
class EpisodeEvaluator:
    """Picklable evaluator bundling the configs, for ``run_evolution``."""

    config: EpisodeConfig = field(default_factory=EpisodeConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    sensors: SensorConfig | None = None

    def __call__(self, genome, course, trials, base_seed, best_record_ticks=None) -> TrialSummary:
        return evaluate_trials(
            genome, course, trials, base_seed,
            config=self.config, physics_config=self.physics, sensors=self.sensors,
            best_record_ticks=best_record_ticks,
        )


@dataclass(frozen=True)
class JitterRow:
    delay_ticks: int
    mean_fitness: float
    success_rate: float


def jitter_sweep(
    genome: Genome,
    course,
    delays: Sequence[int],
    trials: int = 1,
    config: EpisodeConfig | None = None,
    physics_config: PhysicsConfig | None = None,
    sensors: SensorConfig | None = None,
    base_seed: int = 0,
) -> list[JitterRow]:
    config = config or EpisodeConfig()
    rows = []
    for d in sorted(set(int(v) for v in delays)):
        cfg = replace(config, jitter=JitterSpec.fixed(d))
        summary = evaluate_trials(genome, course, trials, base_seed, cfg, physics_config, sensors)
        rows.append(JitterRow(d, summary.mean_fitness, summary.success_rate))
    return rows
