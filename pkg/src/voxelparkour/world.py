"""Voxel courses and the randomized course generator.

A course is a one-block-wide strip of cells laid along +Z at ``x = 0`` and a
single elevation.  Cell ``i`` occupies the unit block ``(0, elevation, i)``.
Start cells come first, the goal block is the last cell, and air cells are
gaps the agent has to jump.  Everything outside the strip is void.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

START_LENGTH = 3
VOID_DEPTH = 5
SCHEMA_VERSION = 1

_COURSE_DIR = Path(__file__).parent / "courses"


class CourseError(ValueError):
    """Raised for malformed courses, course files and generator settings."""


class BlockKind(enum.Enum):
    AIR = "."
    SOLID = "B"
    START = "S"
    GOAL = "G"

    @property
    def solid(self) -> bool:
        return self is not BlockKind.AIR


@dataclass(frozen=True)
class CdrConfig:
    """Settings for continual domain randomization of the course strip."""

    cell_count: int = 20
    max_gap: int = 4
    block_probability: float = 0.5
    death_threshold: int = 10

    def __post_init__(self) -> None:
        if self.max_gap < 1:
            raise CourseError(f"max_gap must be >= 1, got {self.max_gap}")
        if not 0.0 <= self.block_probability <= 1.0:
            raise CourseError(
                f"block_probability must lie in [0, 1], got {self.block_probability}"
            )
        if self.death_threshold < 1:
            raise CourseError(f"death_threshold must be >= 1, got {self.death_threshold}")
        if self.cell_count < START_LENGTH + 2:
            raise CourseError(
                f"cell_count={self.cell_count} cannot hold a {START_LENGTH}-cell start "
                f"platform, one interior cell and the goal (need >= {START_LENGTH + 2})"
            )

    def to_dict(self) -> dict:
        return {
            "cell_count": self.cell_count,
            "max_gap": self.max_gap,
            "block_probability": self.block_probability,
            "death_threshold": self.death_threshold,
        }


@dataclass(frozen=True)
class Course:
    """Immutable voxel course.

    ``cells`` is the S/B/./G string along the strip.  ``obstacles`` holds extra
    solid blocks as absolute ``(x, y, z)`` coordinates; only hand-made fixtures
    use it (pillars, walls), the generator never does.
    """

    cells: str
    cell_elevation: int = 64
    course_id: str = "course"
    seed: int = 0
    obstacles: frozenset = frozenset()
    config: dict | None = None
    _occupied: tuple = field(init=False, repr=False, compare=False)
    _bounds: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        cells = self.cells
        bad = set(cells) - {k.value for k in BlockKind}
        if bad:
            raise CourseError(f"unknown cell characters {sorted(bad)!r}")
        if cells.count("G") != 1:
            raise CourseError(f"course needs exactly one goal cell, found {cells.count('G')}")
        starts = [i for i, c in enumerate(cells) if c == "S"]
        if not starts:
            raise CourseError("course has no start cell")
        if starts != list(range(starts[0], starts[-1] + 1)):
            raise CourseError("start cells must form one contiguous region")
        object.__setattr__(self, "obstacles", frozenset(tuple(map(int, b)) for b in self.obstacles))
        object.__setattr__(self, "_occupied", tuple(c != "." for c in cells))

        lo = [0, self.cell_elevation, 0]
        hi = [1, self.cell_elevation + 1, len(cells)]
        for x, y, z in self.obstacles:
            lo = [min(lo[0], x), min(lo[1], y), min(lo[2], z)]
            hi = [max(hi[0], x + 1), max(hi[1], y + 1), max(hi[2], z + 1)]
        object.__setattr__(self, "_bounds", (tuple(lo), tuple(hi)))

    @property
    def start_region(self) -> range:
        first = self.cells.index("S")
        return range(first, self.cells.rindex("S") + 1)

    @property
    def goal_index(self) -> int:
        return self.cells.index("G")

    @property
    def void_y(self) -> float:
        return float(self.cell_elevation - VOID_DEPTH)

    @property
    def goal_cell(self) -> tuple[int, int, int]:
        return (0, self.cell_elevation, self.goal_index)

    @property
    def goal_point(self) -> tuple[float, float, float]:
        """Centre of the goal block's top face."""
        return (0.5, self.cell_elevation + 1.0, self.goal_index + 0.5)

    @property
    def spawn_point(self) -> tuple[float, float, float]:
        region = self.start_region
        middle = region[len(region) // 2]
        return (0.5, self.cell_elevation + 1.0, middle + 0.5)

    @property
    def bounds(self) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
        """Integer AABB ``(lo, hi)`` enclosing every occupied block."""
        return self._bounds

    def solid(self, x: int, y: int, z: int) -> bool:
        if x == 0 and y == self.cell_elevation and 0 <= z < len(self._occupied):
            if self._occupied[z]:
                return True
        return bool(self.obstacles) and (x, y, z) in self.obstacles

    def gaps(self) -> list[int]:
        """Lengths of the maximal air runs between start and goal."""
        inner = self.cells[self.start_region.stop : self.goal_index]
        return [len(run) for run in inner.split("B") if run and set(run) == {"."}]

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "course_id": self.course_id,
            "seed": self.seed,
            "cell_elevation": self.cell_elevation,
            "cells": self.cells,
            "config": self.config,
        }
        if self.obstacles:
            doc["obstacles"] = [list(b) for b in sorted(self.obstacles)]
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def block_at(course: Course, position: tuple[int, int, int]) -> BlockKind:
    x, y, z = (int(v) for v in position)
    if (x, y, z) in course.obstacles:
        return BlockKind.SOLID
    if x == 0 and y == course.cell_elevation and 0 <= z < len(course.cells):
        return BlockKind(course.cells[z])
    return BlockKind.AIR


def _course_id(config: CdrConfig, seed: int) -> str:
    key = json.dumps(
        {
            "seed": seed,
            "cell_count": config.cell_count,
            "max_gap": config.max_gap,
            "block_probability": config.block_probability,
        },
        sort_keys=True,
    )
    return "cdr-" + hashlib.sha256(key.encode()).hexdigest()[:12]


def draw_interior(config: CdrConfig, seed: int) -> str:
    """Pre-repair interior cells: one independent solid/air draw per cell."""
    rng = np.random.default_rng(seed)
    n = config.cell_count - START_LENGTH - 1
    draws = rng.random(n)
    return "".join("B" if u < config.block_probability else "." for u in draws)


def repair_gaps(interior: str, max_gap: int) -> str:
    """Solidify the trailing excess of every air run longer than ``max_gap``."""
    out = list(interior)
    run = 0
    for i, c in enumerate(out):
        if c == ".":
            run += 1
            if run > max_gap:
                out[i] = "B"
        else:
            run = 0
    return "".join(out)


def generate_course(config: CdrConfig, seed: int, cell_elevation: int = 64) -> Course:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise CourseError(f"seed must be a 64-bit unsigned integer, got {seed}")
    interior = repair_gaps(draw_interior(config, seed), config.max_gap)
    return Course(
        cells="S" * START_LENGTH + interior + "G",
        cell_elevation=cell_elevation,
        course_id=_course_id(config, seed),
        seed=seed,
        config=config.to_dict(),
    )


def should_regenerate(cumulative_deaths: int, config: CdrConfig) -> bool:
    return cumulative_deaths >= config.death_threshold


def loads_course(text: str) -> Course:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CourseError(f"course file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CourseError("course file must hold a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise CourseError(f"unsupported course schema_version {version!r}")
    try:
        return Course(
            cells=doc["cells"],
            cell_elevation=int(doc.get("cell_elevation", 64)),
            course_id=str(doc.get("course_id", "course")),
            seed=int(doc.get("seed", 0)),
            obstacles=frozenset(tuple(b) for b in doc.get("obstacles", [])),
            config=doc.get("config"),
        )
    except KeyError as exc:
        raise CourseError(f"course file is missing field {exc}") from exc


def load_course(path: str | Path) -> Course:
    return loads_course(Path(path).read_text())


def fixture_names() -> list[str]:
    return sorted(p.stem for p in _COURSE_DIR.glob("*.json"))


def resolve_course(ref: str | Path) -> Course:
    """Load a course from a file path or a bundled fixture name (``two-gap``)."""
    path = Path(ref)
    if path.is_file():
        return load_course(path)
    name = path.name.removesuffix(".json")
    fixture = _COURSE_DIR / f"{name}.json"
    if fixture.is_file():
        return load_course(fixture)
    raise CourseError(f"no course file or fixture named {str(ref)!r} (fixtures: {fixture_names()})")
