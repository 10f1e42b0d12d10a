"""Deterministic tick kinematics for a sprint-locked player on a voxel course.

Conventions: +Y is up, yaw 0 faces +Z (down the course), and a positive yaw
delta turns right, i.e. toward -X.  Horizontal velocity is set kinematically
every tick; vertical velocity follows the gravity-then-drag update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

EPS = 1e-7


class ContractError(RuntimeError):
    """An operation was called outside its precondition."""


class VoxelWorld(Protocol):
    void_y: float
    goal_cell: tuple[int, int, int]

    def solid(self, x: int, y: int, z: int) -> bool: ...


@dataclass(frozen=True)
class PhysicsConfig:
    tick_rate: int = 20
    sprint_speed: float = 0.4
    jump_velocity: float = 0.42
    gravity: float = 0.08
    vertical_drag: float = 0.98
    max_yaw_per_tick: float = 0.26
    strafe_speed_fraction: float = 0.6
    player_half_width: float = 0.3
    player_height: float = 1.8

    def __post_init__(self) -> None:
        for name in (
            "tick_rate",
            "sprint_speed",
            "jump_velocity",
            "gravity",
            "vertical_drag",
            "max_yaw_per_tick",
            "player_half_width",
            "player_height",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"physics.{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.strafe_speed_fraction <= 1:
            raise ValueError(
                f"physics.strafe_speed_fraction must lie in (0, 1], got {self.strafe_speed_fraction}"
            )


@dataclass(frozen=True)
class ActionCommand:
    jump: bool = False
    strafe_left: bool = False
    strafe_right: bool = False
    yaw_delta: float = 0.0

    def __post_init__(self) -> None:
        if not -1.0 <= self.yaw_delta <= 1.0:
            raise ValueError(f"yaw_delta must lie in [-1, 1], got {self.yaw_delta}")


IDLE = ActionCommand()


@dataclass(frozen=True)
class AgentState:
    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    on_ground: bool = True
    tick: int = 0
    alive: bool = True
    reached_goal: bool = False


def forward_vector(yaw: float) -> tuple[float, float]:
    """Unit (x, z) heading for ``yaw``."""
    return (-math.sin(yaw), math.cos(yaw))


def right_vector(yaw: float) -> tuple[float, float]:
    return (-math.cos(yaw), -math.sin(yaw))


def spawn(course, config: PhysicsConfig | None = None) -> AgentState:
    return AgentState(position=tuple(float(v) for v in course.spawn_point))


def _clip(box: list[float], axis: int, delta: float, world: VoxelWorld) -> float:
    """Largest move in ``[0, delta]`` along ``axis`` that keeps ``box`` out of solids.

    ``box`` is ``[x0, y0, z0, x1, y1, z1]``.  Every block in the swept region is
    checked, so moves of any length cannot tunnel.
    """
    if delta == 0.0:
        return 0.0
    lo = [box[0], box[1], box[2]]
    hi = [box[3], box[4], box[5]]
    if delta > 0:
        hi[axis] += delta
    else:
        lo[axis] += delta
    ranges = [
        range(math.floor(lo[a] + EPS), math.ceil(hi[a] - EPS)) for a in range(3)
    ]
    for bx in ranges[0]:
        for by in ranges[1]:
            for bz in ranges[2]:
                if not world.solid(bx, by, bz):
                    continue
                cell = (bx, by, bz)
                if delta > 0:
                    gap = cell[axis] - box[3 + axis]
                    if gap > -EPS:
                        delta = min(delta, max(gap, 0.0))
                else:
                    gap = cell[axis] + 1 - box[axis]
                    if gap < EPS:
                        delta = max(delta, min(gap, 0.0))
    return delta


def _overlaps_goal(box: list[float], world: VoxelWorld) -> bool:
    gx, gy, gz = world.goal_cell
    return (
        box[0] < gx + 1 and box[3] > gx
        and box[1] <= gy + 3 and box[4] > gy
        and box[2] < gz + 1 and box[5] > gz
    )


def step(
    state: AgentState,
    action: ActionCommand,
    course: VoxelWorld,
    config: PhysicsConfig,
) -> AgentState:
    if not state.alive or state.reached_goal:
        raise ContractError("cannot step an agent that is dead or already at the goal")

    yaw = state.yaw + action.yaw_delta * config.max_yaw_per_tick
    fx, fz = forward_vector(yaw)
    vx = fx * config.sprint_speed
    vz = fz * config.sprint_speed
    if action.strafe_left != action.strafe_right:
        rx, rz = right_vector(yaw)
        side = config.sprint_speed * config.strafe_speed_fraction
        if action.strafe_left:
            side = -side
        vx += rx * side
        vz += rz * side

    vy = state.velocity[1]
    if action.jump and state.on_ground:
        vy = config.jump_velocity
    vy = (vy - config.gravity) * config.vertical_drag

    w = config.player_half_width
    x, y, z = state.position
    box = [x - w, y, z - w, x + w, y + config.player_height, z + w]

    dx = _clip(box, 0, vx, course)
    box[0] += dx
    box[3] += dx
    dz = _clip(box, 2, vz, course)
    box[2] += dz
    box[5] += dz
    dy = _clip(box, 1, vy, course)
    box[1] += dy
    box[4] += dy

    on_ground = vy < 0 and dy != vy
    if dx != vx:
        vx = 0.0
    if dz != vz:
        vz = 0.0
    if dy != vy:
        vy = 0.0

    position = (x + dx, y + dy, z + dz)
    reached = _overlaps_goal(box, course)
    alive = position[1] >= course.void_y
    return AgentState(
        position=position,
        velocity=(vx, vy, vz),
        yaw=math.remainder(yaw, math.tau),
        on_ground=on_ground,
        tick=state.tick + 1,
        alive=alive,
        reached_goal=reached,
    )


def _two_platform(gap: int, runup: int = 0):
    from .world import Course

    return Course("SSS" + "B" * runup + "." * gap + "BBBG", course_id=f"span-{gap}")


def _scripted_clear(course, config: PhysicsConfig, strafe: tuple[bool, bool] = (False, False)) -> bool:
    """Run forward and jump on the last on-ground tick before the first ledge."""
    state = spawn(course, config)
    ledge = course.cells.index(".")
    plain = ActionCommand(strafe_left=strafe[0], strafe_right=strafe[1])
    hop = replace(plain, jump=True)
    jumped = False
    for _ in range(200):
        if not jumped:
            probe = step(state, plain, course, config)
            if not probe.on_ground:
                state, jumped = step(state, hop, course, config), True
                continue
            state = probe
        else:
            state = step(state, plain, course, config)
        if not state.alive:
            return False
        if state.reached_goal or (jumped and state.on_ground and state.position[2] > ledge):
            return state.position[2] > ledge
    return False


def clears_gap(gap: int, config: PhysicsConfig, runup: int = 0) -> bool:
    return _scripted_clear(_two_platform(gap, runup), config)


def max_jump_span(config: PhysicsConfig | None = None, limit: int = 16) -> int:
    """Widest air gap the scripted jump-at-the-ledge controller clears."""
    config = config or PhysicsConfig()
    span = 0
    for gap in range(1, limit + 1):
        if not clears_gap(gap, config):
            break
        span = gap
    return span
