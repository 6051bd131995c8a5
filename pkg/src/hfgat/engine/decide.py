"""Per-UAV hierarchical decision: local reflex, regional steering, audit logging.

Phase 1 runs dense attention over up to ``max_local_neighbors`` peers inside
``local_radius`` and returns a reflexive maneuver when the highest risk
exceeds ``tau_critical``.  Phase 2 attends to ``ceil(log2 n)`` sparse peers
and steers toward the waypoint with risk-gated repulsion; on learning ticks
it also produces a clipped, noised gradient.  Phase 3 turns pending critical
events into audit records.

Steering law (risk ``r_j`` gates each neighbour with ``min(1, 2 r_j)``)::

    t_j   = clip(-(r.u)/|u|^2, 0, horizon)      r, u relative position/velocity
    m_j   = r + u t_j                           predicted miss vector
    a_j   = min(a_max, 3 (R_avoid - |m_j|) / max(t_j, 0.5)^2) * (-m_j/|m_j|)
    a_sep = a_max (1 - |r|/R_sep) * (-r/|r|)    when |r| < R_sep
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..attention import AttentionParams, LocalGraph, ego_features, forward, relative_features, \
    risk_gradient_flat, select_sparse_indices, sparse_k
from ..core import RngStream, UavState, clamp_norm
from ..globallayer.audit import AuditRecord, digest, generate_proof, make_salt
from ..gradient import GradientVector
from ..privacy import PrivacyConfig, add_dp_noise, clip_gradient, epsilon_for_policy
from ..simnet import DecisionTrace
from .config import Scenario

_UP = np.array([0.0, 0.0, 1.0])
_MIN_T = 0.5
_AVOID_GAIN = 3.0


def closest_approach(r: np.ndarray, u: np.ndarray, horizon: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
    """Constant-velocity closest approach for rows of relative position/velocity.

    Returns ``(t_cpa, miss)`` with ``t_cpa`` clipped to ``[0, horizon]``.
    """
    r = np.atleast_2d(r)
    u = np.atleast_2d(u)
    uu = np.einsum("ij,ij->i", u, u)
    ru = np.einsum("ij,ij->i", r, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(uu > 1e-12, -ru / np.where(uu > 1e-12, uu, 1.0), 0.0)
    t = np.clip(t, 0.0, horizon)
    return t, r + u * t[:, None]


def cpa_distance(r, u) -> float:
    _, miss = closest_approach(np.asarray(r, float), np.asarray(u, float))
    return float(np.linalg.norm(miss[0]))


def _right_of(r: np.ndarray) -> np.ndarray:
    """Horizontal unit vector to the right of ``r``; x-axis when ``r`` is vertical."""
    side = np.cross(r, _UP)
    n = np.linalg.norm(side)
    if n < 1e-9:
        return np.array([1.0, 0.0, 0.0])
    return side / n


def reflexive_maneuver(ego_pos, ego_vel, nb_pos, nb_vel, a_max: float, dt: float = 0.1) -> np.ndarray:
    """Full-magnitude acceleration perpendicular to the neighbour's relative position.

    Of the perpendicular directions, the one opposing the predicted miss
    vector is used (the right-hand horizontal when the miss is along ``r``).
    Between that direction and its opposite, the one whose velocity impulse
    ``a * dt`` yields the larger constant-velocity closest approach wins;
    ties keep the first candidate.
    """
    ego_pos, ego_vel = np.asarray(ego_pos, float), np.asarray(ego_vel, float)
    r = np.asarray(nb_pos, float) - ego_pos
    u = np.asarray(nb_vel, float) - ego_vel
    rn = np.linalg.norm(r)
    r_hat = r / rn if rn > 0 else np.array([1.0, 0.0, 0.0])
    _, miss = closest_approach(r, u)
    away = -miss[0]
    perp = away - (away @ r_hat) * r_hat
    pn = np.linalg.norm(perp)
    d = perp / pn if pn > 1e-6 * max(1.0, rn) else _right_of(r_hat)
    best, best_cpa = d, -1.0
    for cand in (d, -d):
        # the ego's impulse changes the relative velocity by -a dt
        c = cpa_distance(r, u - a_max * dt * cand)
        if c > best_cpa + 1e-12:
            best, best_cpa = cand, c
    return a_max * best


def goal_acceleration(pos, vel, goal, cruise: float, v_max: float, a_max: float,
                      tau: float = 1.0, arrive_time: float = 2.0) -> np.ndarray:
    to_goal = np.asarray(goal, float) - pos
    dist = np.linalg.norm(to_goal)
    if dist < 1e-9:
        v_des = np.zeros(3)
    else:
        v_des = to_goal / dist * min(cruise, v_max, dist / arrive_time)
    return clamp_norm((v_des - vel) / tau, a_max)


def avoidance_acceleration(pos, vel, nb_pos, nb_vel, gates, a_max: float, avoid_radius: float,
                           separation_radius: float, horizon: float) -> np.ndarray:
    if len(nb_pos) == 0:
        return np.zeros(3)
    r = nb_pos - pos
    u = nb_vel - vel
    t, miss = closest_approach(r, u, horizon)
    d = np.linalg.norm(miss, axis=1)
    acc = np.zeros(3)
    act = (d < avoid_radius) & (gates > 0)
    for j in np.nonzero(act)[0]:
        if d[j] > 1e-6:
            direc = -miss[j] / d[j]
        else:
            direc = -_right_of(r[j])
        mag = min(a_max, _AVOID_GAIN * (avoid_radius - d[j]) / max(t[j], _MIN_T) ** 2)
        acc += gates[j] * mag * direc
    rn = np.linalg.norm(r, axis=1)
    close = (rn < separation_radius) & (rn > 1e-9) & (gates > 0)
    for j in np.nonzero(close)[0]:
        acc -= gates[j] * a_max * (1.0 - rn[j] / separation_radius) * r[j] / rn[j]
    return acc


def steer(pos, vel, goal, nb_pos, nb_vel, risks, scenario: Scenario) -> np.ndarray:
    """Waypoint attraction blended with risk-gated repulsion, clamped to ``a_max``."""
    kin, dc = scenario.kinematics, scenario.decision
    a_goal = goal_acceleration(pos, vel, goal, scenario.mission.cruise_speed, kin.v_max, kin.a_max,
                               dc.velocity_tau)
    gates = np.minimum(1.0, 2.0 * np.asarray(risks, float))
    a_avoid = avoidance_acceleration(pos, vel, nb_pos, nb_vel, gates, kin.a_max, dc.avoid_radius,
                                     dc.separation_radius, dc.horizon)
    share = min(1.0, float(np.linalg.norm(a_avoid)) / kin.a_max)
    return clamp_norm(a_avoid + (1.0 - share) * a_goal, kin.a_max)


@dataclass
class WorldView:
    """What every UAV can see at one decision tick (DP-noised beacons).

    ``windows`` holds raw beacon samples ``(m, T, 6)``; ``est_pos`` is the
    window-smoothed position estimate used for geometry.
    """

    ids: np.ndarray
    est_pos: np.ndarray
    vel: np.ndarray
    windows: np.ndarray
    now: float = 0.0

    def __post_init__(self):
        self.row = {int(i): k for k, i in enumerate(self.ids)}


@dataclass
class EgoContext:
    """Private state of the deciding UAV."""

    uav_id: int
    pos: np.ndarray
    vel: np.ndarray
    window: np.ndarray
    goal: np.ndarray
    leaders: tuple[int, ...] = ()
    swarm_size: int = 2
    learn_batch: list | None = None
    model_version: int = 0
    pending_critical: list = field(default_factory=list)


@dataclass
class Decision:
    action: np.ndarray
    trace: DecisionTrace
    reflexive: bool = False
    local_ids: list[int] = field(default_factory=list)
    local_windows: np.ndarray | None = None
    context_targets: list[int] = field(default_factory=list)
    gradient: GradientVector | None = None
    audits: list[AuditRecord] = field(default_factory=list)
    max_risk: float = 0.0


def risks_for(params: AttentionParams, ego_window: np.ndarray, windows: np.ndarray) -> np.ndarray:
    if windows.shape[0] == 0:
        return np.zeros(0)
    h_ego = ego_features(ego_window)
    h_nb = relative_features(windows, ego_window[None, :, :])
    return forward(params, h_ego, h_nb).risk


def local_neighbors(view: WorldView, ego: EgoContext, radius: float, cap: int) -> np.ndarray:
    """Row indices of up to ``cap`` nearest peers within ``radius`` (ties by id)."""
    d = np.linalg.norm(view.est_pos - ego.pos, axis=1)
    mask = (d <= radius) & (view.ids != ego.uav_id)
    rows = np.nonzero(mask)[0]
    order = np.lexsort((view.ids[rows], d[rows]))
    return rows[order[:cap]]


def state_digest(ego: EgoContext) -> bytes:
    return digest(np.concatenate([ego.pos, ego.vel]).astype("<f8").tobytes())


def action_digest(action: np.ndarray) -> bytes:
    return digest(np.asarray(action, dtype="<f8").tobytes())


def make_audit(rule_id: str, action: np.ndarray, ego: EgoContext, rng: RngStream) -> AuditRecord:
    return generate_proof(action_digest(action), state_digest(ego), rule_id, make_salt(rng))


def _learn(params: AttentionParams, ego: EgoContext, theta_threat: float, privacy: PrivacyConfig,
           policy: str, rng: RngStream, dim: int) -> tuple[GradientVector, float]:
    batch = ego.learn_batch or []
    if batch:
        g = risk_gradient_flat(params, batch)
    else:
        g = np.zeros(dim)
    eps = epsilon_for_policy(policy, theta_threat, privacy)
    gv = GradientVector(g, owner=ego.uav_id, model_version=ego.model_version)
    gv = add_dp_noise(clip_gradient(gv, privacy.clip_C), eps, privacy.clip_C, rng)
    return gv, eps


def decide(ego: EgoContext, view: WorldView, theta_threat: float, params: AttentionParams,
           scenario: Scenario, rng: RngStream, privacy: PrivacyConfig | None = None) -> Decision:
    """One hierarchical decision for ``ego``; side effects are returned, not performed."""
    dc, kin = scenario.decision, scenario.kinematics
    trace = DecisionTrace(pipeline=scenario.pipeline, theta_threat=float(theta_threat))

    # Phase 1: dense local attention
    rows = local_neighbors(view, ego, dc.local_radius, dc.max_local_neighbors)
    trace.phases.append("local")
    trace.local_neighbors = len(rows)
    local_ids = [int(view.ids[r]) for r in rows]
    local_windows = view.windows[rows]
    local_risk = risks_for(params, ego.window, local_windows)
    max_risk = float(local_risk.max()) if len(rows) else 0.0
    if max_risk > dc.tau_critical:
        top = int(np.lexsort((np.asarray(local_ids), -local_risk))[0])
        r = rows[top]
        action = reflexive_maneuver(ego.pos, ego.vel, view.est_pos[r], view.vel[r], kin.a_max,
                                    scenario.decision_period)
        trace.local_only = True
        return Decision(action, trace, True, local_ids, local_windows, max_risk=max_risk)

    # Phase 2: sparse regional context
    trace.phases.append("regional")
    others = np.nonzero(view.ids != ego.uav_id)[0]
    k = min(sparse_k(ego.swarm_size), ego.swarm_size - 1) if ego.swarm_size >= 2 else 0
    sel = select_sparse_indices(view.est_pos[others], view.vel[others], view.ids[others], ego.pos, ego.vel,
                                ego.leaders, k)
    sparse_rows = others[sel] if len(sel) else np.zeros(0, dtype=int)
    trace.sparse_k = len(sparse_rows)
    sparse_risk = risks_for(params, ego.window, view.windows[sparse_rows])
    risk_by_row: dict[int, float] = {}
    for r, v in zip(rows, local_risk):
        risk_by_row[int(r)] = float(v)
    for r, v in zip(sparse_rows, sparse_risk):
        risk_by_row[int(r)] = max(float(v), risk_by_row.get(int(r), 0.0))
    nb_rows = np.array(sorted(risk_by_row), dtype=int)
    risks = np.array([risk_by_row[int(r)] for r in nb_rows])
    action = steer(ego.pos, ego.vel, ego.goal, view.est_pos[nb_rows], view.vel[nb_rows], risks, scenario)

    gradient = None
    if ego.learn_batch is not None:
        privacy = privacy or PrivacyConfig(scenario.privacy.eps_min, scenario.privacy.eps_max,
                                           scenario.privacy.clip_C, scenario.privacy.layer1_eps,
                                           scenario.privacy.position_sensitivity)
        gradient, eps = _learn(params, ego, theta_threat, privacy, scenario.privacy.policy, rng, params.size)
        trace.gradient_submitted = True
        trace.epsilon = eps

    # Phase 3: audit commitments for critical events
    audits = []
    if ego.pending_critical:
        trace.phases.append("global")
        trace.critical = True
        trace.consensus_rounds = 1
        for rule in ego.pending_critical:
            audits.append(make_audit(rule, action, ego, rng))
    return Decision(action, trace, False, local_ids, local_windows,
                    [int(view.ids[r]) for r in sparse_rows], gradient, audits, max_risk)


def local_graph(ego: EgoContext, ids: list[int], windows: np.ndarray) -> LocalGraph:
    """Training sample in the form the attention module consumes."""
    state = UavState(ego.uav_id, tuple(ego.pos), tuple(ego.vel), 0.0)
    return LocalGraph(state, list(ids), windows, ego.window)

