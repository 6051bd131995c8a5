"""Geometric and kinematic value types, collision detection and seeded RNG streams.

Everything stochastic in a simulation run draws from an :class:`RngStream`
keyed by ``(seed, stream_id)``.  Streams are backed by numpy's PCG64 bit
generator seeded through ``SeedSequence(seed, spawn_key=(stream_id,))`` so a
given key yields the same draws on every platform.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_V_MAX = 20.0
DEFAULT_A_MAX = 10.0
DEFAULT_SAFETY_RADIUS = 2.0
DEFAULT_NEAR_MISS_RADIUS = 5.0


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, v: Iterable[float]) -> "Vec3":
        x, y, z = (float(c) for c in v)
        return cls(x, y, z)

    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def _check_finite(*vals: float) -> None:
    for v in vals:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r}")


def clamp_norm(v: np.ndarray, limit: float) -> np.ndarray:
    """Scale ``v`` down to norm ``limit`` if it exceeds it; direction is kept."""
    n = float(np.linalg.norm(v))
    if n > limit:
        return v * (limit / n)
    return v


def clamp_norm_rows(v: np.ndarray, limit: float) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(n > limit, limit / np.where(n > 0, n, 1.0), 1.0)
    return v * scale


@dataclass(frozen=True)
class UavState:
    uav_id: int
    position: Vec3
    velocity: Vec3
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", Vec3.of(self.position))
        object.__setattr__(self, "velocity", Vec3.of(self.velocity))
        _check_finite(*self.position, *self.velocity, self.timestamp)


def step_kinematics(state: UavState, accel: Sequence[float], dt: float,
                    v_max: float = DEFAULT_V_MAX) -> UavState:
    """Advance a point mass by one explicit Euler step.

    Position moves with the *old* velocity; the new velocity is clamped to
    ``v_max`` in norm.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    a = np.asarray(accel, dtype=float)
    _check_finite(*a, dt, v_max)
    p = np.array(state.position)
    v = np.array(state.velocity)
    p_next = p + v * dt
    v_next = clamp_norm(v + a * dt, v_max)
    return replace(state, position=Vec3.of(p_next), velocity=Vec3.of(v_next),
                   timestamp=state.timestamp + dt)


def step_kinematics_batch(pos: np.ndarray, vel: np.ndarray, accel: np.ndarray,
                          dt: float, v_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`step_kinematics` over ``(n, 3)`` arrays."""
    return pos + vel * dt, clamp_norm_rows(vel + accel * dt, v_max)


@dataclass(frozen=True, order=True)
class CollisionEvent:
    pair: tuple[int, int]
    distance: float
    time: float
    kind: Literal["collision", "near_miss"]


def detect_collisions(states: Sequence[UavState],
                      safety_radius: float = DEFAULT_SAFETY_RADIUS,
                      near_miss_radius: float = DEFAULT_NEAR_MISS_RADIUS) -> list[CollisionEvent]:
    """Report every unordered pair closer than the collision or near-miss threshold.

    A pair is a ``collision`` when its separation is strictly below
    ``2 * safety_radius``; otherwise a ``near_miss`` when strictly below
    ``near_miss_radius``.  Events are sorted by pair ids.
    """
    ids = [s.uav_id for s in states]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate uav_id in states")
    if not states:
        return []
    t = states[0].timestamp
    if any(s.timestamp != t for s in states):
        raise ValueError("states must share a common timestamp")
    pos = np.array([s.position for s in states], dtype=float)
    limit = max(2.0 * safety_radius, near_miss_radius)
    events = []
    for a, b in cKDTree(pos).query_pairs(limit):
        d = float(np.linalg.norm(pos[a] - pos[b]))
        i, j = sorted((ids[a], ids[b]))
        if d < 2.0 * safety_radius:
            events.append(CollisionEvent((i, j), d, t, "collision"))
        elif d < near_miss_radius:
            events.append(CollisionEvent((i, j), d, t, "near_miss"))
    events.sort(key=lambda e: e.pair)
    return events


def stream_id_for(module: str, uav_id: int = 0) -> int:
    """Stable stream id for a ``(module, uav_id)`` key."""
    digest = hashlib.sha256(f"{module}:{uav_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    @classmethod
    def keyed(cls, seed: int, module: str, uav_id: int = 0) -> "RngStream":
        return cls(seed, stream_id_for(module, uav_id))

    def uniform01(self, size=None):
        return self.gen.random(size)

    def laplace(self, scale: float, size=None):
        if not scale > 0:
            raise ValueError("laplace scale must be positive")
        return self.gen.laplace(0.0, scale, size)

    def normal(self, sigma: float, size=None):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return self.gen.normal(0.0, sigma, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def rng_draw(stream: RngStream, kind: str, param: float | None = None) -> float:
    """Draw one real from ``stream``.

    ``kind`` is ``"uniform01"``, ``"laplace"`` (``param`` = scale) or
    ``"normal"`` (``param`` = sigma).
    """
    if kind == "uniform01":
        return float(stream.uniform01())
    if kind == "laplace":
        return float(stream.laplace(param))
    if kind == "normal":
        return float(stream.normal(param))
    raise ValueError(f"unknown draw kind {kind!r}")
