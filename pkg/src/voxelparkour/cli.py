"""Command-line entry point: ``voxelparkour {train,eval,replay,course,jitter-bench}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import plotting
from .config import DEFAULT_TOML, ConfigError, RunConfig, apply_overrides, load_config
from .episode import EpisodeEvaluator, JitterSpec, evaluate_trials, jitter_sweep, run_episode, dumps_trace
from .evolution import CdrCourses, EvolutionError, FixedCourse, run_evolution
from .policy import GenomeError, load_genome, save_genome
from .world import CourseError, generate_course, resolve_course

log = logging.getLogger("voxelparkour")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    config = load_config(args.config)
    overrides = {
        "ga": {
            "rng_seed": getattr(args, "seed", None),
            "population_size": getattr(args, "population", None),
            "elite_count": getattr(args, "elite", None),
            "trials_per_genome": getattr(args, "trials", None),
            "max_generations": getattr(args, "max_generations", None),
            "early_stop_courses": getattr(args, "early_stop", None),
        },
        "cdr": {
            "cell_count": getattr(args, "cell_count", None),
            "max_gap": getattr(args, "max_gap", None),
            "block_probability": getattr(args, "block_probability", None),
            "death_threshold": getattr(args, "death_threshold", None),
        },
        "run": {
            "course": getattr(args, "course", None),
            "output_dir": getattr(args, "output_dir", None),
            "threads": getattr(args, "threads", None),
        },
    }
    if getattr(args, "no_figures", False):
        overrides["run"]["write_figures"] = False
    return apply_overrides(config, overrides)


def _course_for(args, config: RunConfig):
    if getattr(args, "course", None):
        return resolve_course(args.course)
    if getattr(args, "course_seed", None) is not None:
        return generate_course(config.cdr, args.course_seed, config.run.cell_elevation)
    raise UsageError("give a course (--course PATH|FIXTURE) or a generator seed (--course-seed N)")


def _episode_config(config: RunConfig, delay: int | None, probability: float | None):
    if delay is None and probability is None:
        return config.episode
    jitter = JitterSpec(
        delay=config.episode.jitter.delay if delay is None else delay,
        probability=config.episode.jitter.probability if probability is None else probability,
    )
    return replace(config.episode, jitter=jitter)


def cmd_train(args) -> int:
    config = _config(args)
    out = Path(config.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.mode == "fixed":
        source = FixedCourse(resolve_course(config.run.course))
    else:
        source = CdrCourses(config.cdr, config.ga.rng_seed, config.run.cell_elevation)
    evaluator = EpisodeEvaluator(config.episode, config.physics, config.sensors_for_episode())

    (out / "config.json").write_text(config.dumps())
    telemetry_path = out / "telemetry.jsonl"
    started = time.perf_counter()
    with telemetry_path.open("w") as telemetry:
        def emit(record):
            telemetry.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            telemetry.flush()

        result = run_evolution(
            config.ga, source, evaluator, on_generation=emit, workers=config.run.threads
        )
    best = result.best
    genome_path = save_genome(best, out / f"best_{best.course_id}_gen{best.generation}.json")
    summary = {
        "mode": config.mode,
        "generations": len(result.records),
        "best_fitness": best.fitness,
        "best_generation": best.generation,
        "course_id": best.course_id,
        "reached_goal": result.reached_goal,
        "first_success_generation": result.first_success,
        "genome": genome_path.name,
        "telemetry": telemetry_path.name,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if config.run.write_figures:
        plotting.fitness_curve(result.records, out / "fitness.png")
        plotting.mutation_schedule(result.records, out / "mutation.png")
    log.info("trained %d generations in %.1fs", len(result.records), time.perf_counter() - started)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    genome = load_genome(args.genome)
    course = _course_for(args, config)
    episode = _episode_config(config, args.jitter, args.jitter_probability)
    sensors = config.sensors_for_episode()
    report = run_episode(genome, course, episode, config.physics, sensors, seed=args.eval_seed)
    summary = evaluate_trials(
        genome, course, args.trials, args.eval_seed, episode, config.physics, sensors
    )
    doc = report.summary()
    doc.update(
        course_id=course.course_id,
        trials=summary.trials,
        mean_fitness=summary.mean_fitness,
        success_rate=summary.success_rate,
        jitter={"delay": episode.jitter.delay, "probability": episode.jitter.probability},
    )
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_replay(args) -> int:
    config = _config(args)
    genome = load_genome(args.genome)
    course = _course_for(args, config)
    episode = _episode_config(config, args.jitter, None)
    report = run_episode(
        genome, course, episode, config.physics, config.sensors_for_episode(),
        seed=args.eval_seed, trace=True,
    )
    text = dumps_trace(report)
    try:
        Path(args.trace_out).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write trace to {args.trace_out}: {exc}") from exc
    if args.figure:
        plotting.trajectory(course, report.trace, args.figure)
    print(json.dumps(report.summary(), sort_keys=True))
    return EXIT_OK


def cmd_course(args) -> int:
    config = _config(args)
    course = generate_course(config.cdr, args.seed, config.run.cell_elevation)
    sys.stdout.write(course.dumps())
    return EXIT_OK


def parse_delays(text: str) -> list[int]:
    try:
        delays = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--delays must be a comma-separated list of integers: {text!r}") from exc
    if not delays:
        raise UsageError("--delays must list at least one delay")
    if min(delays) < 0:
        raise UsageError("delays must be >= 0")
    return delays


def cmd_jitter_bench(args) -> int:
    config = _config(args)
    delays = parse_delays(args.delays)
    genome = load_genome(args.genome)
    course = _course_for(args, config)
    rows = jitter_sweep(
        genome, course, delays, args.trials, config.episode, config.physics,
        config.sensors_for_episode(), base_seed=args.eval_seed,
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["delay_ticks", "mean_fitness", "success_rate"])
    for row in rows:
        writer.writerow([row.delay_ticks, repr(row.mean_fitness), repr(row.success_rate)])
    sys.stdout.write(buf.getvalue())
    if args.plot:
        plotting.jitter_degradation(rows, args.plot)
    return EXIT_OK


def cmd_default_config(args) -> int:
    sys.stdout.write(DEFAULT_TOML)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration (defaults apply when omitted)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_course_choice(p: argparse.ArgumentParser) -> None:
    p.add_argument("--course", help="course file or bundled fixture name")
    p.add_argument("--course-seed", type=int, help="generate the course from this seed instead")
    p.add_argument("--cell-count", type=int)
    p.add_argument("--max-gap", type=int)
    p.add_argument("--block-probability", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxelparkour", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="evolve a controller")
    _add_common(p)
    p.add_argument("--seed", type=int, help="GA seed (ga.rng_seed)")
    p.add_argument("--course", help="train on this fixed course; CDR when omitted")
    p.add_argument("--max-generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--elite", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--early-stop", type=int, help="stop after the champion reaches the goal K generations running")
    p.add_argument("--death-threshold", type=int)
    p.add_argument("--cell-count", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a genome on a course")
    _add_common(p)
    p.add_argument("genome")
    _add_course_choice(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jitter", type=int, help="action delay in ticks")
    p.add_argument("--jitter-probability", type=float, help="per-command delay probability")
    p.add_argument("--eval-seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="write a tick-by-tick JSONL trace")
    _add_common(p)
    p.add_argument("genome")
    _add_course_choice(p)
    p.add_argument("--trace-out", required=True)
    p.add_argument("--figure", help="also render the trajectory to this image")
    p.add_argument("--jitter", type=int)
    p.add_argument("--eval-seed", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("course", help="print a generated course file")
    _add_common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cell-count", type=int)
    p.add_argument("--max-gap", type=int)
    p.add_argument("--block-probability", type=float)
    p.add_argument("--death-threshold", type=int)
    p.set_defaults(func=cmd_course)

    p = sub.add_parser("jitter-bench", help="fitness and success rate versus action delay (CSV)")
    _add_common(p)
    p.add_argument("genome")
    _add_course_choice(p)
    p.add_argument("--delays", default="0,1,2,3,4")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--plot", help="render the degradation curve to this image")
    p.set_defaults(func=cmd_jitter_bench)

    sub.add_parser("default-config", help="print the default TOML configuration").set_defaults(
        func=cmd_default_config
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, CourseError, GenomeError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EvolutionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
