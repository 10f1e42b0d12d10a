"""Run configuration: one TOML document aggregating every subsystem's settings.

Precedence is command-line flags > file values > dataclass defaults.  The
resolved configuration is archived as JSON next to a run's outputs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from .episode import EpisodeConfig, FitnessWeights, JitterSpec
from .evolution import GaConfig
from .physics import PhysicsConfig
from .sensing import SensorConfig
from .world import CdrConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunSettings:
    course: str | None = None
    output_dir: str = "runs/latest"
    cell_elevation: int = 64
    threads: int = 1
    write_figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    ga: GaConfig = field(default_factory=GaConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    cdr: CdrConfig = field(default_factory=CdrConfig)
    run: RunSettings = field(default_factory=RunSettings)

    @property
    def mode(self) -> str:
        return "fixed" if self.run.course else "cdr"

    def sensors_for_episode(self) -> SensorConfig:
        """Sensor settings normalised by the episode timeout and the sprint speed."""
        return dataclasses.replace(
            self.sensors,
            episode_timeout_ticks=self.episode.timeout_ticks,
            velocity_scale=self.physics.sprint_speed,
        )

    def to_dict(self) -> dict:
        doc = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            doc[f.name] = dataclasses.asdict(getattr(self, f.name))
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTIONS = {
    "ga": GaConfig,
    "episode": EpisodeConfig,
    "physics": PhysicsConfig,
    "sensors": SensorConfig,
    "cdr": CdrConfig,
    "run": RunSettings,
}


def _coerce(section: str, name: str, value, default):
    where = f"{section}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return tuple(float(v) for v in value)
    return value


def _build(section: str, cls, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f"{section}: expected a table, got {values!r}")
    defaults = cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for name, value in values.items():
        if name not in known:
            raise ConfigError(f"{section}.{name}: unknown field (known: {sorted(known)})")
        default = getattr(defaults, name)
        if section == "episode" and name == "jitter":
            value = _build("episode.jitter", JitterSpec, value)
        elif section == "episode" and name == "weights":
            value = _build("episode.weights", FitnessWeights, value)
        elif default is None:
            value = value if value != "" else None
        else:
            value = _coerce(section, name, value, default)
        kwargs[name] = value
    try:
        return dataclasses.replace(defaults, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def from_dict(doc: dict) -> RunConfig:
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported value {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - set(_SECTIONS) - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    parts = {name: _build(name, cls, doc.get(name, {})) for name, cls in _SECTIONS.items()}
    return RunConfig(**parts)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    return from_dict(doc)


def apply_overrides(config: RunConfig, overrides: dict[str, dict]) -> RunConfig:
    """Merge ``{section: {field: value}}`` over ``config``, skipping None values."""
    doc = config.to_dict()
    for section, values in overrides.items():
        for name, value in values.items():
            if value is not None:
                doc[section][name] = value
    return from_dict(doc)


DEFAULT_TOML = """\
# voxelparkour run configuration
schema_version = 1

[ga]
population_size = 100
elite_count = 5
mutation_rate = 0.1
mutation_sigma = 0.2
plateau_delta = 50.0
plateau_patience = 3
double_sigma = true
trials_per_genome = 3
max_generations = 200
early_stop_courses = 0
rng_seed = 0

[episode]
timeout_ticks = 400
stuck_window_ticks = 40
stuck_displacement = 0.5
early_death_ticks = 20

[episode.jitter]
delay = 0
probability = 1.0

[episode.weights]
progress = 100.0
proximity = 200.0
goal = 500.0
record = 100.0
early_death = 50.0
stuck = 50.0

[physics]
sprint_speed = 0.4
jump_velocity = 0.42
gravity = 0.08
vertical_drag = 0.98
max_yaw_per_tick = 0.26
strafe_speed_fraction = 0.6
player_half_width = 0.3
player_height = 1.8

[sensors]
max_distance = 10.0
eye_height = 1.62

[cdr]
cell_count = 20
max_gap = 4
block_probability = 0.5
death_threshold = 10

[run]
# course = "two-gap"   # fixture name or course file; omit for CDR training
output_dir = "runs/latest"
threads = 1
write_figures = true
"""
