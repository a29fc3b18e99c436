"""World state, discrete clock, seeded randomness, and kinematic stepping.

Time is step-indexed: every speed is expressed in meters per step and the
clock advances by exactly one step per tick. The world is planar (2D).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Vec2 = np.ndarray  # shape (2,), float64


def vec2(x: float, y: float) -> Vec2:
    """Build a finite 2D position/velocity vector."""
    v = np.array([x, y], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector components must be finite, got ({x}, {y})")
    return v


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent, reproducible RNG stream.

    Identical (seed, stream_id) pairs yield identical draw sequences;
    distinct stream ids give statistically independent streams, so adding
    an entity to a scenario never perturbs the draws of the others.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream_id))))


@dataclass
class RngStream:
    """Handle for a named random stream (seed + stream id)."""

    seed: int
    stream_id: int
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = rng_stream(self.seed, self.stream_id)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


class SimClock:
    """Discrete mission clock; advances by exactly 1 per tick."""

    def __init__(self, step: int = 0):
        if step < 0:
            raise ValueError("clock cannot start at a negative step")
        self.step = int(step)

    def tick(self) -> int:
        self.step += 1
        return self.step


@dataclass
class TargetState:
    """Planar target kinematics: position (m) and velocity (m/step)."""

    position: Vec2
    velocity: Vec2

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("target state must be finite")

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass
class UavPose:
    """Agent identity and planar position."""

    id: int
    position: Vec2

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not np.all(np.isfinite(self.position)):
            raise ValueError(f"UAV {self.id} position must be finite")


@dataclass
class MobilityLimits:
    """Per-step displacement interval [v_min, v_max] in m/step."""

    v_min: float = 8.0
    v_max: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.v_min <= self.v_max):
            raise ValueError(f"need 0 < v_min <= v_max, got [{self.v_min}, {self.v_max}]")


def step_target(state: TargetState, accel_std: float, rng: np.random.Generator) -> TargetState:
    """Advance the target one step: straight line plus random acceleration.

    Position moves by the current velocity, then the velocity picks up a
    zero-mean Gaussian kick with std ``accel_std`` per axis.
    """
    if accel_std < 0:
        raise ValueError("accel_std must be non-negative")
    new_pos = state.position + state.velocity
    kick = rng.normal(0.0, accel_std, size=2) if accel_std > 0 else np.zeros(2)
    return TargetState(position=new_pos, velocity=state.velocity + kick)


def step_uav(pose: UavPose, waypoint: Vec2, limits: MobilityLimits) -> UavPose:
    """Move a UAV toward a waypoint with the displacement clamped into
    [v_min, v_max].

    If the waypoint is closer than v_min the UAV still travels v_min along
    the waypoint direction (overshoot is allowed); the speed interval is
    never violated.
    """
    waypoint = np.asarray(waypoint, dtype=float)
    if not np.all(np.isfinite(waypoint)):
        raise ValueError("waypoint must be finite")
    offset = waypoint - pose.position
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        raise ValueError(f"waypoint equals the current position of UAV {pose.id}: direction undefined")
    travel = min(max(dist, limits.v_min), limits.v_max)
    return UavPose(id=pose.id, position=pose.position + offset * (travel / dist))
