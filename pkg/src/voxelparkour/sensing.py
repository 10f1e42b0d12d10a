"""Ray-cast sensing: the 33-wide observation vector fed to the policy.

Layout of the vector::

    [0..18]  forward rays, fanned over 180 degrees at eye height
    [19..21] ground rays, 45 degrees down at -30/0/+30 degrees relative yaw
    [22..23] ceiling rays, 45 degrees up at -15/+15 degrees relative yaw
    [24..26] goal offset in the agent frame (forward, up, right) / max_distance
    [27..29] velocity in the agent frame / velocity_scale
    [30]     on-ground flag
    [31]     distance to goal / max_distance
    [32]     clock, tick / episode_timeout_ticks
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import AgentState, ContractError, forward_vector, right_vector

INPUT_WIDTH = 33
SCALAR_COUNT = 9


@dataclass(frozen=True)
class SensorConfig:
    forward_ray_count: int = 19
    fan_degrees: float = 180.0
    max_distance: float = 10.0
    ground_ray_count: int = 3
    ceiling_ray_count: int = 2
    eye_height: float = 1.62
    episode_timeout_ticks: int = 400
    velocity_scale: float = 0.4
    ground_pitch_degrees: float = 45.0
    ground_yaw_degrees: tuple[float, ...] = (-30.0, 0.0, 30.0)
    ceiling_pitch_degrees: float = 45.0
    ceiling_yaw_degrees: tuple[float, ...] = (-15.0, 15.0)

    def __post_init__(self) -> None:
        width = self.forward_ray_count + self.ground_ray_count + self.ceiling_ray_count + SCALAR_COUNT
        if width != INPUT_WIDTH:
            raise ValueError(f"sensor layout gives {width} inputs, the policy expects {INPUT_WIDTH}")
        if len(self.ground_yaw_degrees) != self.ground_ray_count:
            raise ValueError("ground_yaw_degrees must list one angle per ground ray")
        if len(self.ceiling_yaw_degrees) != self.ceiling_ray_count:
            raise ValueError("ceiling_yaw_degrees must list one angle per ceiling ray")
        if self.max_distance <= 0 or self.episode_timeout_ticks <= 0 or self.velocity_scale <= 0:
            raise ValueError("max_distance, episode_timeout_ticks and velocity_scale must be > 0")
        if self.forward_ray_count < 2:
            raise ValueError("forward_ray_count must be >= 2")


def _slab_entry(origin, direction, lo, hi, t_end):
    """Parametric entry ``(t, axis)`` of the ray into box ``[lo, hi]``, or None."""
    t0, t1, axis = 0.0, t_end, -1
    for a in range(3):
        o, d = origin[a], direction[a]
        if d == 0.0:
            if o < lo[a] or o > hi[a]:
                return None
            continue
        ta = (lo[a] - o) / d
        tb = (hi[a] - o) / d
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0, axis = ta, a
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return None
    return t0, axis


def hit_distance(origin, direction, world, max_distance: float) -> float | None:
    """Distance at which the ray enters its first solid cell, or None on a miss.

    Exact grid walk (Amanatides-Woo).  The walk starts where the ray enters the
    world's occupied bounding box, which is the same answer as walking from the
    origin because no cell outside that box is solid.
    """
    lo, hi = world.bounds
    entry = _slab_entry(origin, direction, lo, hi, max_distance)
    if entry is None:
        return None
    t, entry_axis = entry

    cell = [0, 0, 0]
    step = [0, 0, 0]
    t_max = [math.inf, math.inf, math.inf]
    t_delta = [math.inf, math.inf, math.inf]
    for a in range(3):
        d = direction[a]
        p = origin[a] + d * t
        if a == entry_axis:
            c = lo[a] if d > 0 else hi[a] - 1
        else:
            c = math.floor(p)
            if d < 0 and p == c:
                c -= 1
        cell[a] = c
        if d > 0:
            step[a] = 1
            t_max[a] = (c + 1 - origin[a]) / d
            t_delta[a] = 1.0 / d
        elif d < 0:
            step[a] = -1
            t_max[a] = (c - origin[a]) / d
            t_delta[a] = -1.0 / d

    solid = world.solid
    while t <= max_distance:
        if not (lo[0] <= cell[0] < hi[0] and lo[1] <= cell[1] < hi[1] and lo[2] <= cell[2] < hi[2]):
            return None
        if solid(cell[0], cell[1], cell[2]):
            return max(t, 0.0)
        if t_max[0] < t_max[1]:
            a = 0 if t_max[0] < t_max[2] else 2
        else:
            a = 1 if t_max[1] < t_max[2] else 2
        t = t_max[a]
        cell[a] += step[a]
        t_max[a] += t_delta[a]
    return None


def cast_ray(origin, direction, world, max_distance: float = 10.0) -> float:
    """Normalised hit value ``1 - d / max_distance``; 0 when nothing is hit."""
    norm = math.sqrt(sum(c * c for c in direction))
    if abs(norm - 1.0) > 1e-9:
        raise ContractError(f"ray direction must be unit length, |d| = {norm!r}")
    d = hit_distance(origin, direction, world, max_distance)
    if d is None:
        return 0.0
    return 1.0 - d / max_distance


def ray_direction(yaw: float, pitch: float) -> tuple[float, float, float]:
    fx, fz = forward_vector(yaw)
    c = math.cos(pitch)
    return (fx * c, math.sin(pitch), fz * c)


def ray_angles(config: SensorConfig) -> list[tuple[float, float]]:
    """Relative ``(yaw, pitch)`` of every ray, in vector order."""
    fan = math.radians(config.fan_degrees)
    n = config.forward_ray_count
    angles = [((i / (n - 1) - 0.5) * fan, 0.0) for i in range(n)]
    down = -math.radians(config.ground_pitch_degrees)
    angles += [(math.radians(a), down) for a in config.ground_yaw_degrees]
    up = math.radians(config.ceiling_pitch_degrees)
    angles += [(math.radians(a), up) for a in config.ceiling_yaw_degrees]
    return angles


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def sense(state: AgentState, course, config: SensorConfig) -> np.ndarray:
    if not state.alive:
        raise ContractError("cannot sense for a dead agent")
    x, y, z = state.position
    eye = (x, y + config.eye_height, z)
    reach = config.max_distance
    values = []
    for rel_yaw, pitch in ray_angles(config):
        values.append(cast_ray(eye, ray_direction(state.yaw + rel_yaw, pitch), course, reach))

    fx, fz = forward_vector(state.yaw)
    rx, rz = right_vector(state.yaw)
    gx, gy, gz = course.goal_point
    ox, oy, oz = gx - x, gy - y, gz - z
    values += [
        _clamp((ox * fx + oz * fz) / reach, -1.0, 1.0),
        _clamp(oy / reach, -1.0, 1.0),
        _clamp((ox * rx + oz * rz) / reach, -1.0, 1.0),
    ]
    vx, vy, vz = state.velocity
    scale = config.velocity_scale
    values += [
        _clamp((vx * fx + vz * fz) / scale, -1.0, 1.0),
        _clamp(vy / scale, -1.0, 1.0),
        _clamp((vx * rx + vz * rz) / scale, -1.0, 1.0),
    ]
    values.append(1.0 if state.on_ground else 0.0)
    values.append(_clamp(math.sqrt(ox * ox + oy * oy + oz * oz) / reach, 0.0, 1.0))
    values.append(_clamp(state.tick / config.episode_timeout_ticks, 0.0, 1.0))
    return np.array(values, dtype=np.float64)
