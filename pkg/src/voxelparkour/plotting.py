"""Matplotlib figures written next to the machine-readable run outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}

CELL_COLORS = {"S": "#444444", "B": "#7cbf3b", "G": "#c0392b"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def fitness_curve(records: Sequence, path) -> Path:
    """Champion and population-mean fitness per generation.

    Generations evaluated on a freshly regenerated course are marked on the
    x axis; goal-reaching champions are drawn as filled dots.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        gens = [r.generation for r in records]
        ax.plot(gens, [r.best_fitness for r in records], color="C0", lw=1.2, label="best")
        ax.plot(gens, [r.mean_fitness for r in records], color="C1", lw=1.0, label="mean")
        hits = [r for r in records if r.best_reached_goal]
        if hits:
            ax.scatter([r.generation for r in hits], [r.best_fitness for r in hits],
                       s=8, color="C0", zorder=3, label="champion reached goal")
        regen = [r.generation + 1 for r in records if r.regenerated]
        if regen:
            ax.plot(regen, [ax.get_ylim()[0]] * len(regen), "|", color="0.5", ms=6,
                    label="course regenerated")
        ax.set_xlabel("generation")
        ax.set_ylabel("fitness")
        ax.legend(loc="lower right")
        return _save(fig, path)


def mutation_schedule(records: Sequence, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        gens = [r.generation for r in records]
        ax.step(gens, [r.current_mutation_rate for r in records], where="post", label="rate")
        ax.step(gens, [r.current_mutation_sigma for r in records], where="post", label="sigma")
        ax.set_yscale("log")
        ax.set_xlabel("generation")
        ax.legend()
        return _save(fig, path)


def jitter_degradation(rows: Sequence, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        delays = [r.delay_ticks for r in rows]
        ax.plot(delays, [r.mean_fitness for r in rows], "o-", color="C0")
        ax.set_xlabel("action delay (ticks)")
        ax.set_ylabel("mean fitness", color="C0")
        twin = ax.twinx()
        twin.plot(delays, [r.success_rate for r in rows], "s--", color="C3")
        twin.set_ylabel("success rate", color="C3")
        twin.set_ylim(-0.05, 1.05)
        twin.grid(False)
        return _save(fig, path)


def trajectory(course, trace: Sequence[dict], path) -> Path:
    """Side view of a replayed episode over the course strip."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.4, len(course.cells) * 0.35), 2.8))
        top = course.cell_elevation + 1
        for i, c in enumerate(course.cells):
            if c != ".":
                ax.add_patch(plt.Rectangle((i, top - 1), 1, 1, color=CELL_COLORS[c], lw=0))
        ax.plot([row["z"] for row in trace], [row["y"] for row in trace], color="C0", lw=1)
        jumps = [row for row in trace if row["jump"]]
        ax.scatter([r["z"] for r in jumps], [r["y"] for r in jumps], s=6, color="C1", zorder=3)
        ax.axhline(course.void_y, color="0.6", ls=":", lw=0.8)
        ax.set_xlim(-0.5, len(course.cells) + 0.5)
        ax.set_ylim(course.void_y - 0.5, top + 2)
        ax.set_aspect("equal")
        ax.set_xlabel("z (blocks along course)")
        ax.set_ylabel("y")
        return _save(fig, path)
