"""Fixed 33-32-4 MLP controller and its flat genome encoding.

Genome layout (1220 genes): layer-1 weights row-major by hidden neuron
(32 x 33), layer-1 biases (32), layer-2 weights row-major by output neuron
(4 x 32), layer-2 biases (4).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .physics import ActionCommand, ContractError

INPUT_WIDTH = 33
HIDDEN_WIDTH = 32
OUTPUT_WIDTH = 4
PARAMETER_COUNT = INPUT_WIDTH * HIDDEN_WIDTH + HIDDEN_WIDTH + HIDDEN_WIDTH * OUTPUT_WIDTH + OUTPUT_WIDTH
SCHEMA_VERSION = 1

_W1 = slice(0, INPUT_WIDTH * HIDDEN_WIDTH)
_B1 = slice(_W1.stop, _W1.stop + HIDDEN_WIDTH)
_W2 = slice(_B1.stop, _B1.stop + HIDDEN_WIDTH * OUTPUT_WIDTH)
_B2 = slice(_W2.stop, _W2.stop + OUTPUT_WIDTH)


class GenomeError(ValueError):
    """Raised when a genome or genome file does not fit the fixed topology."""


@dataclass(frozen=True, eq=False)
class Genome:
    parameters: np.ndarray
    generation: int = 0
    fitness: float | None = None
    course_id: str | None = None
    _layers: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        params = np.array(self.parameters, dtype=np.float64)
        if params.shape != (PARAMETER_COUNT,):
            raise GenomeError(
                f"expected {PARAMETER_COUNT} parameters, got {params.size} (shape {params.shape})"
            )
        if not np.all(np.isfinite(params)):
            raise GenomeError("genome parameters must all be finite")
        params.setflags(write=False)
        object.__setattr__(self, "parameters", params)
        object.__setattr__(
            self,
            "_layers",
            (
                params[_W1].reshape(HIDDEN_WIDTH, INPUT_WIDTH),
                params[_B1],
                params[_W2].reshape(OUTPUT_WIDTH, HIDDEN_WIDTH),
                params[_B2],
            ),
        )

    @property
    def layers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self._layers

    @property
    def metadata(self) -> dict:
        return {"generation": self.generation, "fitness": self.fitness, "course_id": self.course_id}

    def with_metadata(self, **changes) -> "Genome":
        return replace(self, **changes)

    @classmethod
    def zeros(cls) -> "Genome":
        return cls(np.zeros(PARAMETER_COUNT))


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def glorot_init(rng_seed: int, generation: int = 0) -> Genome:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(rng_seed)
    params = np.zeros(PARAMETER_COUNT)
    b1 = glorot_bound(INPUT_WIDTH, HIDDEN_WIDTH)
    b2 = glorot_bound(HIDDEN_WIDTH, OUTPUT_WIDTH)
    params[_W1] = rng.uniform(-b1, b1, size=_W1.stop - _W1.start)
    params[_W2] = rng.uniform(-b2, b2, size=_W2.stop - _W2.start)
    return Genome(params, generation=generation)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def raw_outputs(genome: Genome, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape != (INPUT_WIDTH,):
        raise ContractError(f"policy expects {INPUT_WIDTH} inputs, got shape {x.shape}")
    w1, b1, w2, b2 = genome.layers
    return w2 @ np.tanh(w1 @ x + b1) + b2


def forward(genome: Genome, inputs) -> ActionCommand:
    o = raw_outputs(genome, inputs)
    return ActionCommand(
        jump=sigmoid(o[0]) > 0.5,
        strafe_left=sigmoid(o[1]) > 0.5,
        strafe_right=sigmoid(o[2]) > 0.5,
        yaw_delta=math.tanh(o[3]),
    )


def genome_to_dict(genome: Genome) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "topology": {"input": INPUT_WIDTH, "hidden": HIDDEN_WIDTH, "output": OUTPUT_WIDTH},
        "parameters": [float(v) for v in genome.parameters],
        "metadata": genome.metadata,
    }


def genome_from_dict(doc) -> Genome:
    if not isinstance(doc, dict):
        raise GenomeError("genome document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise GenomeError(f"unsupported genome schema_version {version!r} (expected {SCHEMA_VERSION})")
    topology = doc.get("topology", {})
    expected = {"input": INPUT_WIDTH, "hidden": HIDDEN_WIDTH, "output": OUTPUT_WIDTH}
    if topology != expected:
        raise GenomeError(f"topology mismatch: file has {topology}, expected {expected}")
    params = doc.get("parameters")
    if not isinstance(params, list):
        raise GenomeError("genome file has no parameter array")
    if len(params) != PARAMETER_COUNT:
        raise GenomeError(f"expected {PARAMETER_COUNT} parameters, got {len(params)}")
    meta = doc.get("metadata") or {}
    return Genome(
        np.array(params, dtype=np.float64),
        generation=int(meta.get("generation") or 0),
        fitness=meta.get("fitness"),
        course_id=meta.get("course_id"),
    )


def dumps_genome(genome: Genome) -> str:
    return json.dumps(genome_to_dict(genome), indent=1, sort_keys=True) + "\n"


def save_genome(genome: Genome, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps_genome(genome))
    return path


def load_genome(path: str | Path) -> Genome:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GenomeError(f"{path}: malformed genome JSON: {exc}") from exc
    try:
        return genome_from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise GenomeError(f"{path}: {exc}") from exc
