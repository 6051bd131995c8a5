"""Mission generator: random start/goal pairs with forced path crossings."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import RngStream
from .config import Scenario


@dataclass(frozen=True)
class MissionSpec:
    uav_id: int
    start: tuple[float, float, float]
    waypoints: tuple[tuple[float, float, float], ...]
    tolerance: float
    time_budget: float

    @property
    def goal(self) -> np.ndarray:
        return np.array(self.waypoints[-1])

    def path_length(self) -> float:
        pts = [self.start, *self.waypoints]
        return float(sum(math.dist(a, b) for a, b in zip(pts, pts[1:])))


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper 2-D intersection of segments ``p1p2`` and ``q1q2`` (xy only)."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def generate_missions(scenario: Scenario, seed: int, max_tries: int = 200) -> list[MissionSpec]:
    """One single-waypoint mission per UAV.

    Starts keep ``min_start_separation`` from earlier starts; goals lie at a
    uniform distance in ``[min_path, max_path]`` and inside the margin.  With
    ``force_crossings`` each path is resampled (up to ``max_tries``) until it
    crosses at least one earlier path; the first UAV is exempt.
    """
    mc = scenario.mission
    W, H, _ = scenario.world
    rng = RngStream.keyed(seed, "missions")
    g = rng.gen
    lo_x, hi_x = mc.margin, W - mc.margin
    lo_y, hi_y = mc.margin, H - mc.margin
    starts: list[np.ndarray] = []
    goals: list[np.ndarray] = []
    out = []
    for i in range(scenario.n_uavs):
        best = None
        for attempt in range(max_tries):
            z = g.uniform(*mc.altitude)
            s = np.array([g.uniform(lo_x, hi_x), g.uniform(lo_y, hi_y), z])
            if any(np.linalg.norm(s - o) < mc.min_start_separation for o in starts):
                continue
            length = g.uniform(mc.min_path, mc.max_path)
            ang = g.uniform(0, 2 * math.pi)
            e = s + length * np.array([math.cos(ang), math.sin(ang), 0.0])
            if not (lo_x <= e[0] <= hi_x and lo_y <= e[1] <= hi_y):
                continue
            best = (s, e)
            if not mc.force_crossings or not starts:
                break
            if any(_segments_cross(s, e, a, b) for a, b in zip(starts, goals)):
                break
        if best is None:
            raise RuntimeError("could not place a mission; world too small for the swarm")
        s, e = best
        starts.append(s)
        goals.append(e)
        length = float(np.linalg.norm(e - s))
        budget = length / mc.cruise_speed * mc.budget_factor + mc.budget_slack
        out.append(MissionSpec(i, tuple(map(float, s)), (tuple(map(float, e)),), mc.tolerance, budget))
    return out
