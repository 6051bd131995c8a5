"""Scenario execution: one deterministic event loop per ``(scenario, seed)``.

Each decision tick every airborne UAV broadcasts a noised beacon, then
decides with the selected pipeline; between decision ticks kinematics run
at ``tick`` resolution with collision detection, and queued messages
(context replies, gradients, model broadcasts) are delivered in time order.
UAVs leave the airspace when they reach their goal or collide.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from ..aggregation import AggregatorState, Aggregated, Rejected, submit_gradient
from ..attention import AttentionParams, risk_loss
from ..core import RngStream, step_kinematics_batch
from ..globallayer.audit import record_size
from ..globallayer.cost import LoggingCostModel, logging_cost
from ..globallayer.dht import DhtNetwork, node_id_for
from ..gradient import gradient_frame_size, model_frame_size
from ..privacy import PrivacyConfig, ThreatIndicators, ThreatObservation, ThreatWeights, threat_score, \
    update_threat_indicators
from ..simnet import ComputeCostModel, DecisionTrace, EventQueue, LinkModel, decision_latency
from .adversary import apply_adversary, byzantine_ids
from .config import Scenario
from .decide import Decision, EgoContext, WorldView, closest_approach, decide, goal_acceleration, local_graph, make_audit, \
    reflexive_maneuver, risks_for, steer
from .metrics import MetricsReport, RunEvents, compute_metrics
from .missions import generate_missions
from .pretrain import CONFLICT_HORIZON, CONFLICT_MISS, pretrained_params, synthetic_batch

BEACON_BYTES = 64
CONTEXT_BYTES = 96
STATE_BYTES = 64
ACTION_BYTES = 40


@lru_cache(maxsize=1)
def evaluation_batch():
    return synthetic_batch(10_007, 200)


@dataclass
class _Experience:
    time: float
    ids: list
    windows: np.ndarray
    ego_window: np.ndarray
    pos: np.ndarray
    vel: np.ndarray


@dataclass
class _RegionComm:
    sent: int = 0
    lost: int = 0
    delay_sum: float = 0.0
    delivered: int = 0

    def flush(self) -> tuple[int, int, float]:
        out = (self.sent, self.lost, self.delay_sum / self.delivered if self.delivered else 0.0)
        self.sent = self.lost = self.delivered = 0
        self.delay_sum = 0.0
        return out


@dataclass(frozen=True)
class PipelineSpec:
    """How a pipeline differs from the full hierarchical stack."""

    name: str
    learns: bool
    aggregator_mode: str | None
    anomaly_gate: bool
    dense_all_peers: bool
    audit_logging: str | None
    centralized: bool


def baseline_pipelines(scenario: Scenario) -> PipelineSpec:
    p = scenario.pipeline
    return {
        "hfgat": PipelineSpec(p, True, "robust", True, False, "dht", False),
        "fedavg_variant": PipelineSpec(p, True, "fedavg", False, False, "dht", False),
        "monolithic": PipelineSpec(p, True, "fedavg", False, True, "blockchain_model", False),
        "centralized": PipelineSpec(p, False, None, False, False, None, True),
        "disabled": PipelineSpec(p, False, None, False, False, None, False),
    }[p]


def conflict_label(pos, vel, windows, dt: float) -> int:
    """1 when any neighbour's beacon-estimated closest approach is a conflict.

    Uses the same definition as the pretraining labels, evaluated on the
    window-smoothed estimate (positions extrapolated to the newest sample).
    """
    T = windows.shape[1]
    ages = (T - 1 - np.arange(T)) * dt
    est = (windows[:, :, :3] + windows[:, :, 3:] * ages[None, :, None]).mean(axis=1)
    _, miss = closest_approach(est - pos, windows[:, -1, 3:] - vel, CONFLICT_HORIZON)
    return int(np.any(np.linalg.norm(miss, axis=1) < CONFLICT_MISS))


def region_grid(scenario: Scenario) -> int:
    return max(1, round(math.sqrt(scenario.n_uavs / scenario.region_target)))


class Simulation:
    def __init__(self, scenario: Scenario, seed: int, keep_traces: bool = False):
        self.sc = sc = scenario
        self.seed = int(seed)
        self.n = n = sc.n_uavs
        self.keep_traces = keep_traces
        self.traces: list[DecisionTrace] = []
        self.latencies: list[float] = []
        self.missions = generate_missions(sc, seed)
        self.pos = np.array([m.start for m in self.missions], dtype=float)
        self.goals = np.array([m.goal for m in self.missions], dtype=float)
        to_goal = self.goals - self.pos
        self.vel = to_goal / np.linalg.norm(to_goal, axis=1, keepdims=True) * sc.mission.cruise_speed
        self.accel = np.zeros((n, 3))
        self.active = np.ones(n, dtype=bool)
        self.ev = RunEvents()

        self.link = LinkModel(sc.link.base_latency, sc.link.jitter, sc.link.loss_prob, sc.link.comm_radius)
        self.cost = ComputeCostModel(sc.cost.c_local, sc.cost.c_regional, sc.cost.c_global, sc.cost.c_central_pair)
        p = sc.privacy
        self.privacy = PrivacyConfig(p.eps_min, p.eps_max, p.clip_C, p.layer1_eps, p.position_sensitivity)
        self.weights = ThreatWeights(*sc.threat.weights)
        self.queue = EventQueue(log=sc.event_log)

        adv = sc.adversary
        self.byz = byzantine_ids(adv, n, seed)
        self.spoof = np.zeros((n, 3))
        if adv.behavior("position_spoof") is not None:
            for i in sorted(self.byz):
                self.spoof[i] = apply_adversary(adv, np.zeros(3), RngStream.keyed(seed, "spoof", i))
        self.jam_link = apply_adversary(adv, self.link, RngStream.keyed(seed, "jam"))
        self.jammers = self.byz if adv.behavior("comm_jam") is not None else frozenset()
        self.rng_beacon = RngStream.keyed(seed, "beacon")
        self.rng_link = RngStream.keyed(seed, "link")
        self.rng_poison = RngStream.keyed(seed, "poison")
        self.rng_audit = RngStream.keyed(seed, "audit")
        self.rng_dp = [RngStream.keyed(seed, "dp", i) for i in range(n)]

        self._setup_regions()
        self._setup_models()

        T = sc.decision.window
        self.T = T
        self.hist = np.zeros((T, n, 6))
        self.hist_t = np.zeros(T)
        self.ego_hist = np.zeros((T, n, 6))
        self.hist_count = 0
        self.experiences = [deque(maxlen=8) for _ in range(n)]
        self.close_log: list[list[tuple[float, int]]] = [[] for _ in range(n)]
        self.close_now: set[int] = set()
        self.pending: list[list[str]] = [[] for _ in range(n)]
        self.reflexing = np.zeros(n, dtype=bool)
        self.near_now: set[int] = set()
        self.decision_index = 0
        self.dht: DhtNetwork | None = None
        self.log_model = LoggingCostModel(n=n, k=sc.dht_k, link_latency=sc.link.base_latency,
                                          commit_latency=sc.cost.blockchain_commit, record_bytes=record_size())

    # -- setup -------------------------------------------------------------

    def _setup_regions(self) -> None:
        sc, n = self.sc, self.n
        if sc.pipeline == "monolithic":
            self.region_of = np.zeros(n, dtype=int)
            self.server_pos = np.array([[sc.world[0] / 2, sc.world[1] / 2, self.pos[:, 2].mean()]])
        else:
            g = region_grid(sc)
            cx = np.clip((self.pos[:, 0] / sc.world[0] * g).astype(int), 0, g - 1)
            cy = np.clip((self.pos[:, 1] / sc.world[1] * g).astype(int), 0, g - 1)
            cell = cx * g + cy
            used = sorted(set(int(c) for c in cell))
            remap = {c: r for r, c in enumerate(used)}
            self.region_of = np.array([remap[int(c)] for c in cell])
            self.server_pos = np.array([[(c // g + 0.5) * sc.world[0] / g, (c % g + 0.5) * sc.world[1] / g,
                                         self.pos[:, 2].mean()] for c in used])
        R = len(self.server_pos)
        self.members = [np.nonzero(self.region_of == r)[0] for r in range(R)]
        self.leaders = tuple(int(m.min()) for m in self.members)
        self.region_comm = [_RegionComm() for _ in range(R)]
        self.indicators = [ThreatIndicators() for _ in range(R)]
        pinned = self.sc.threat.pinned
        self.region_theta = [pinned if pinned is not None else 0.0 for _ in range(R)]
        self.coordinator = np.array([sc.world[0] / 2, sc.world[1] / 2, self.pos[:, 2].mean()])

    def _setup_models(self) -> None:
        sc = self.sc
        self.theta0 = pretrained_params().flatten()
        self.theta0_norm = float(np.linalg.norm(self.theta0))
        self.spec = baseline_pipelines(sc)
        self.learning = self.spec.learns
        mode = self.spec.aggregator_mode or "fedavg"
        lc = sc.learning
        self.aggs = [AggregatorState(self.theta0, len(m), eta=lc.eta, tau_anomaly=lc.tau_anomaly,
                                     max_staleness=lc.max_staleness, mode=mode) for m in self.members]
        self.uav_theta = np.tile(self.theta0, (self.n, 1))
        self.uav_params = [pretrained_params()] * self.n
        self.uav_version = np.zeros(self.n, dtype=int)
        self.uav_threat = np.array([self.region_theta[r] for r in self.region_of], dtype=float)
        self.learn_every = max(1, round(lc.learning_period / sc.decision_period))
        self.max_norm_ratio = 1.0

    # -- messaging ---------------------------------------------------------

    def _node_pos(self, node: int) -> np.ndarray:
        if node < self.n:
            return self.pos[node]
        if node == 2 * self.n + 1:
            return self.coordinator
        return self.server_pos[node - self.n]

    def _send(self, src: int, dst: int, nbytes: int, kind: str, payload=None, region: int | None = None):
        link = self.jam_link if (src in self.jammers or dst in self.jammers) else self.link
        d = float(np.linalg.norm(self._node_pos(src) - self._node_pos(dst)))
        out = self.queue.transmit(src, dst, nbytes, kind, payload, d, link, self.rng_link)
        self.ev.messages_total += 1
        self.ev.bytes_total += nbytes
        if region is not None:
            self.ev.regional_messages += 1
            rc = self.region_comm[region]
            rc.sent += 1
            if isinstance(out, str):
                rc.lost += 1
            else:
                rc.delivered += 1
                rc.delay_sum += out.deliver_at - out.sent_at
        return out

    def _server(self, r: int) -> int:
        return self.n + r

    def _audit(self, origin: int, record) -> None:
        self.ev.audit_records += 1
        data = record.to_bytes()
        if self.spec.audit_logging == "blockchain_model":
            msgs, nbytes, _ = logging_cost(1, "blockchain_model", self.log_model)
            self.ev.messages_total += msgs
            self.ev.bytes_total += nbytes
            return
        if self.dht is None:
            self.dht = DhtNetwork([node_id_for(f"uav-{i}") for i in range(self.n)], k=self.sc.dht_k,
                                  rng=RngStream.keyed(self.seed, "dht-bootstrap"))
        _, res = self.dht.store(node_id_for(f"uav-{origin}"), record.key, data)
        self.ev.messages_total += res.messages
        self.ev.bytes_total += res.bytes

    # -- sensing -----------------------------------------------------------

    def _beacons(self, t: float) -> WorldView:
        act = np.nonzero(self.active)[0]
        T = self.T
        slot = self.hist_count % T
        noise = self.rng_beacon.laplace(self.privacy.position_noise_scale, (len(act), 3))
        rep = self.pos[act] + noise + self.spoof[act]
        self.hist[slot, act, :3] = rep
        self.hist[slot, act, 3:] = self.vel[act]
        self.ego_hist[slot, act, :3] = self.pos[act]
        self.ego_hist[slot, act, 3:] = self.vel[act]
        self.hist_t[slot] = t
        self.hist_count += 1
        self.ev.messages_total += len(act)
        self.ev.bytes_total += BEACON_BYTES * len(act)
        have = min(self.hist_count, T)
        order = [(self.hist_count - have + k) % T for k in range(have)]
        order = [order[0]] * (T - have) + order
        win = self.hist[order][:, act].transpose(1, 0, 2)          # (m, T, 6)
        ages = t - self.hist_t[order]
        est = (win[:, :, :3] + win[:, :, 3:] * ages[None, :, None]).mean(axis=1)
        self._ego_order = order
        return WorldView(act, est, self.vel[act].copy(), win, t)

    def _ego_window(self, i: int) -> np.ndarray:
        return self.ego_hist[self._ego_order, i]

    # -- learning ----------------------------------------------------------

    def _batch(self, i: int, t: float):
        horizon = self.sc.learning.label_horizon
        out = []
        conflict = self.sc.learning.label_mode == "conflict"
        for e in reversed(self.experiences[i]):
            if conflict:
                label = conflict_label(e.pos, e.vel, e.windows, self.sc.decision_period)
            else:
                if e.time + horizon > t:
                    continue
                ids = set(e.ids)
                label = int(any(e.time < tm <= e.time + horizon and o in ids for tm, o in self.close_log[i]))
            ego = EgoContext(i, e.pos, e.vel, e.ego_window, self.goals[i])
            out.append((local_graph(ego, e.ids, e.windows), label))
            if len(out) >= self.sc.learning.batch_size:
                break
        cutoff = t - 2 * horizon - self.sc.learning.learning_period * 8
        self.close_log[i] = [x for x in self.close_log[i] if x[0] >= cutoff]
        return out

    def _deliver(self, ev) -> None:
        t = ev.deliver_at
        if ev.kind == "gradient":
            r = ev.dst - self.n
            agg = self.aggs[r]
            out = submit_gradient(agg, ev.payload, t)
            if isinstance(out, Rejected) and out.reason == "anomaly":
                self.ev.rejected_gradients += 1
                rec = make_audit("gradient-rejection", ev.payload.values[:3], EgoContext(
                    ev.src, self.pos[ev.src], self.vel[ev.src], None, self.goals[ev.src]), self.rng_audit)
                self._audit(self.leaders[r], rec)
            elif isinstance(out, Aggregated):
                self.max_norm_ratio = max(self.max_norm_ratio, float(np.linalg.norm(out.theta)) / self.theta0_norm)
                for u in self.members[r]:
                    if self.active[u]:
                        self._send(self._server(r), int(u), model_frame_size(len(out.theta)), "model",
                                   (out.theta, out.version, self.region_theta[r]), r)
        elif ev.kind == "model":
            u = ev.dst
            theta, version, th = ev.payload
            if version > self.uav_version[u]:
                self.uav_theta[u] = theta
                self.uav_params[u] = AttentionParams.unflatten(theta)
                self.uav_version[u] = version
            self.uav_threat[u] = th

    def _threat_update(self, t: float) -> None:
        ts = self.sc.threat
        for r, agg in enumerate(self.aggs):
            submitted, rejected, scores = agg.flush_window()
            sent, lost, mean_delay = self.region_comm[r].flush()
            obs = ThreatObservation(submitted, rejected, scores, sent, lost, mean_delay)
            self.indicators[r] = update_threat_indicators(self.indicators[r], obs, ts.ewma_lambda, ts.delay_max)
            if ts.pinned is None:
                self.region_theta[r] = threat_score(self.indicators[r], self.weights)
            self.ev.threat_trace.append((round(t, 9), r, self.region_theta[r]))

    # -- decisions ---------------------------------------------------------

    def _record(self, trace: DecisionTrace) -> None:
        trace.latency = decision_latency(trace, self.cost)
        net = float(sum(trace.network_delays)) + trace.extra_latency
        self.ev.compute_ms.append(1000.0 * (trace.latency - net))
        self.latencies.append(trace.latency)
        if self.keep_traces:
            self.traces.append(trace)

    def _decision_tick(self, t: float) -> None:
        view = self._beacons(t)
        self.ev.decision_ticks += 1
        d_idx = self.decision_index
        self.decision_index += 1
        pipeline = self.sc.pipeline
        if pipeline == "disabled":
            kin = self.sc.kinematics
            for i in view.ids:
                self.accel[i] = goal_acceleration(self.pos[i], self.vel[i], self.goals[i],
                                                  self.sc.mission.cruise_speed, kin.v_max, kin.a_max,
                                                  self.sc.decision.velocity_tau)
                self._record(DecisionTrace(pipeline="disabled"))
            return
        if pipeline == "centralized":
            self._central_tick(view, t)
            return
        for i in view.ids:
            i = int(i)
            r = int(self.region_of[i])
            learn = self.learning and (d_idx + i) % self.learn_every == 0
            ego = EgoContext(i, self.pos[i].copy(), self.vel[i].copy(), self._ego_window(i), self.goals[i],
                             self.leaders, self.n, self._batch(i, t) if learn else None,
                             int(self.uav_version[i]), list(self.pending[i]))
            if pipeline == "monolithic":
                dec = self._decide_monolithic(ego, view, t)
            else:
                dec = decide(ego, view, float(self.uav_threat[i]), self.uav_params[i], self.sc,
                             self.rng_dp[i], self.privacy)
            self.accel[i] = dec.action
            tr = dec.trace
            if dec.reflexive:
                self.ev.reflexive_decisions += 1
                if not self.reflexing[i]:
                    self.pending[i].append("reflexive-maneuver")
                self.reflexing[i] = True
            else:
                self.reflexing[i] = False
                self.pending[i] = []
            delays = []
            for j in dec.context_targets:
                out = self._send(j, i, CONTEXT_BYTES, "context", None, r)
                if not isinstance(out, str):
                    delays.append(out.deliver_at - out.sent_at)
            if delays:
                tr.network_delays.append(max(delays))
            if dec.gradient is not None:
                g = dec.gradient
                self.ev.epsilon_trace.append(tr.epsilon)
                if i in self.byz:
                    g = apply_adversary(self.sc.adversary, g, self.rng_poison)
                self._send(i, self._server(r), gradient_frame_size(len(g)), "gradient", g, r)
            for rec in dec.audits:
                self._audit(i, rec)
            if learn and dec.local_ids:
                self.experiences[i].append(_Experience(t, dec.local_ids, dec.local_windows, ego.window,
                                                       ego.pos, ego.vel))
            self._record(tr)

    def _decide_monolithic(self, ego: EgoContext, view: WorldView, t: float) -> Decision:
        sc = self.sc
        trace = DecisionTrace(pipeline="monolithic", theta_threat=float(self.uav_threat[ego.uav_id]))
        trace.phases.append("local")
        d = np.linalg.norm(view.est_pos - ego.pos, axis=1)
        rows = np.nonzero((d <= sc.link.comm_radius) & (view.ids != ego.uav_id))[0]
        trace.local_neighbors = len(rows)
        params = self.uav_params[ego.uav_id]
        risk = risks_for(params, ego.window, view.windows[rows])
        near = d[rows] <= sc.decision.local_radius
        if near.any() and float(risk[near].max()) > sc.decision.tau_critical:
            cand = rows[near]
            rk = risk[near]
            top = int(np.lexsort((view.ids[cand], -rk))[0])
            rr = cand[top]
            action = reflexive_maneuver(ego.pos, ego.vel, view.est_pos[rr], view.vel[rr], sc.kinematics.a_max,
                                        sc.decision_period)
            trace.local_only = True
            return Decision(action, trace, True)
        action = steer(ego.pos, ego.vel, ego.goal, view.est_pos[rows], view.vel[rows], risk, sc)
        dec = Decision(action, trace)
        local = rows[near]
        order = np.lexsort((view.ids[local], d[local]))[: sc.decision.max_local_neighbors]
        dec.local_ids = [int(view.ids[x]) for x in local[order]]
        dec.local_windows = view.windows[local[order]]
        if ego.learn_batch is not None:
            from .decide import _learn
            dec.gradient, eps = _learn(params, ego, trace.theta_threat, self.privacy, sc.privacy.policy,
                                       self.rng_dp[ego.uav_id], params.size)
            trace.gradient_submitted = True
            trace.epsilon = eps
        if ego.pending_critical:
            trace.critical = True
            trace.extra_latency += logging_cost(len(ego.pending_critical), "blockchain_model", self.log_model)[2]
            for rule in ego.pending_critical:
                dec.audits.append(make_audit(rule, action, ego, self.rng_audit))
        return dec

    def _central_tick(self, view: WorldView, t: float) -> None:
        sc = self.sc
        coord = 2 * self.n + 1
        ups = {}
        for i in view.ids:
            out = self._send(int(i), coord, STATE_BYTES, "central_up")
            if not isinstance(out, str):
                ups[int(i)] = out.deliver_at - out.sent_at
        if not ups:
            return
        rows = np.array([view.row[i] for i in sorted(ups)])
        pos, vel = view.est_pos[rows], view.vel[rows]
        tree = cKDTree(pos)
        m = len(rows)
        pairs = m * (m - 1) // 2
        cap = min(sc.decision.max_local_neighbors + 1, m)
        dist, idx = tree.query(pos, k=cap, distance_upper_bound=sc.decision.local_radius)
        dist, idx = np.atleast_2d(dist), np.atleast_2d(idx)
        for a, i in enumerate(sorted(ups)):
            nb = [j for j, dj in zip(idx[a], dist[a]) if j != a and j < m and np.isfinite(dj)]
            nb = np.array(nb, dtype=int)
            action = steer(self.pos[i], self.vel[i], self.goals[i], pos[nb], vel[nb], np.ones(len(nb)), sc)
            out = self._send(coord, i, ACTION_BYTES, "central_down")
            if isinstance(out, str):
                continue
            self.accel[i] = action
            tr = DecisionTrace(pipeline="centralized", central_pairs=pairs,
                               network_delays=[ups[i], out.deliver_at - out.sent_at])
            self._record(tr)

    # -- main loop ---------------------------------------------------------

    def _physics(self, t1: float) -> None:
        kin = self.sc.kinematics
        act = np.nonzero(self.active)[0]
        if len(act) < 2:
            return
        pos = self.pos[act]
        pairs = cKDTree(pos).query_pairs(kin.encounter_radius, output_type="ndarray")
        if len(pairs) == 0:
            self.near_now = set()
            self.close_now = set()
            return
        a, b = act[pairs[:, 0]], act[pairs[:, 1]]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        d = np.linalg.norm(self.pos[lo] - self.pos[hi], axis=1)
        n = self.n
        self.ev.encounter_pairs.update((lo * n + hi).tolist())
        close_now = set()
        for k in np.nonzero(d < self.sc.learning.label_radius)[0]:
            i, j = int(lo[k]), int(hi[k])
            key = i * n + j
            close_now.add(key)
            if key not in self.close_now:
                self.close_log[i].append((t1, j))
                self.close_log[j].append((t1, i))
        self.close_now = close_now
        near_now = set()
        crashed = []
        for k in np.nonzero(d < kin.near_miss_radius)[0]:
            i, j = int(lo[k]), int(hi[k])
            key = i * n + j
            near_now.add(key)
            if d[k] < 2.0 * kin.safety_radius:
                self.ev.collision_pairs.add(key)
                crashed += [i, j]
            else:
                self.ev.near_miss_pairs.add(key)
            if key not in self.near_now:
                if self.learning:
                    self.pending[i].append("near-miss")
                    self.pending[j].append("near-miss")
        self.near_now = near_now
        for i in crashed:
            self.active[i] = False
            self.ev.crashed.add(i)

    def run(self) -> MetricsReport:
        sc = self.sc
        per_decision = max(1, round(sc.decision_period / sc.tick))
        per_threat = max(1, round(sc.threat.window / sc.tick))
        n_ticks = round(sc.duration / sc.tick)
        tol2 = np.array([m.tolerance for m in self.missions]) ** 2
        for step in range(n_ticks):
            t = step * sc.tick
            if step % per_decision == 0:
                self._decision_tick(t)
            act = self.active
            self.pos[act], self.vel[act] = step_kinematics_batch(self.pos[act], self.vel[act], self.accel[act],
                                                                 sc.tick, sc.kinematics.v_max)
            t1 = (step + 1) * sc.tick
            self._physics(t1)
            arrived = self.active & (((self.pos - self.goals) ** 2).sum(axis=1) <= tol2)
            for i in np.nonzero(arrived)[0]:
                self.ev.arrivals[int(i)] = t1
                self.active[i] = False
            for ev in self.queue.advance(t1):
                self._deliver(ev)
            if self.learning and (step + 1) % per_threat == 0:
                self._threat_update(t1)
            if not self.active.any():
                break
        return self.report()

    def report(self) -> MetricsReport:
        n = self.n
        self.ev.encounter_pairs = {(k // n, k % n) for k in self.ev.encounter_pairs}
        self.ev.collision_pairs = {(k // n, k % n) for k in self.ev.collision_pairs}
        self.ev.near_miss_pairs = {(k // n, k % n) for k in self.ev.near_miss_pairs}
        batch = evaluation_batch()
        if self.learning:
            losses = [risk_loss(AttentionParams.unflatten(a.theta_G), batch) for a in self.aggs]
            self.ev.final_model_loss = float(np.mean(losses))
            self.ev.model_norm_ratio = max(float(np.linalg.norm(a.theta_G)) / self.theta0_norm for a in self.aggs)
        else:
            self.ev.final_model_loss = float(risk_loss(pretrained_params(), batch))
            self.ev.model_norm_ratio = 1.0
        rep = compute_metrics(self.ev, self.latencies, self.missions)
        sc = self.sc
        rep.labels = {
            "pipeline": sc.pipeline, "seed": self.seed, "n_uavs": n,
            "byzantine_fraction": float(sc.adversary.byzantine_fraction),
            "tolerance": sc.adversary.tolerance_flag(n), "privacy_policy": sc.privacy.policy,
            "threat_pinned": sc.threat.pinned,
        }
        return rep


def run_scenario(scenario: Scenario, seed: int | None = None) -> MetricsReport:
    """Simulate ``scenario`` once; ``seed`` defaults to the scenario's first seed."""
    if seed is None:
        seed = scenario.seeds[0] if scenario.seeds else 0
    return Simulation(scenario, seed).run()
