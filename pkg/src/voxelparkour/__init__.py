"""Voxel parkour simulator and fixed-topology neuroevolution trainer."""

from .episode import EpisodeConfig, FitnessReport, JitterSpec, run_episode
from .evolution import GaConfig, run_evolution, tournament_size
from .physics import ActionCommand, AgentState, PhysicsConfig
from .policy import Genome, forward, glorot_init, load_genome, save_genome
from .sensing import SensorConfig, cast_ray, sense
from .world import BlockKind, CdrConfig, Course, generate_course

__version__ = "0.1.0"

__all__ = [
    "ActionCommand",
    "AgentState",
    "BlockKind",
    "CdrConfig",
    "Course",
    "EpisodeConfig",
    "FitnessReport",
    "GaConfig",
    "Genome",
    "JitterSpec",
    "PhysicsConfig",
    "SensorConfig",
    "cast_ray",
    "forward",
    "generate_course",
    "glorot_init",
    "load_genome",
    "run_episode",
    "run_evolution",
    "save_genome",
    "sense",
    "tournament_size",
]
