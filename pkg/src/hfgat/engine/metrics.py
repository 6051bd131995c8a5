"""Run metrics and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from ..simnet import DecisionTrace, nearest_rank
from .missions import MissionSpec

SCHEMA_VERSION = 1


@dataclass
class RunEvents:
    """Raw outcome of a simulation, reduced by :func:`compute_metrics`."""

    encounter_pairs: set = field(default_factory=set)
    collision_pairs: set = field(default_factory=set)
    near_miss_pairs: set = field(default_factory=set)
    arrivals: dict = field(default_factory=dict)     # uav_id -> arrival time
    crashed: set = field(default_factory=set)
    messages_total: int = 0
    bytes_total: int = 0
    regional_messages: int = 0
    decision_ticks: int = 0
    rejected_gradients: int = 0
    audit_records: int = 0
    reflexive_decisions: int = 0
    threat_trace: list = field(default_factory=list)  # (time, region, theta)
    epsilon_trace: list = field(default_factory=list)
    compute_ms: list = field(default_factory=list)
    final_model_loss: float = 0.0
    model_norm_ratio: float = 1.0


@dataclass
class MetricsReport:
    collision_rate: float
    near_miss_count: int
    mission_success_rate: float
    latency_p50_ms: float
    latency_p95_ms: float
    messages_total: int
    bytes_total: int
    rejected_gradients: int
    threat_score_trace: list
    encounter_pairs: int = 0
    colliding_pairs: int = 0
    decisions: int = 0
    reflexive_decisions: int = 0
    regional_messages_per_tick: float = 0.0
    compute_p50_ms: float = 0.0
    audit_records: int = 0
    final_model_loss: float = 0.0
    model_norm_ratio: float = 1.0
    mean_epsilon: float = 0.0
    mean_theta: float = 0.0
    epsilon_trace: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("collision_rate", "mission_success_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} out of range: {v}")
        if self.latency_p50_ms > self.latency_p95_ms:
            raise ValueError("p50 latency exceeds p95")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)


CSV_COLUMNS = [
    "schema_version", "pipeline", "seed", "n_uavs", "byzantine_fraction", "tolerance", "privacy_policy",
    "threat_pinned", "collision_rate", "near_miss_count", "mission_success_rate", "latency_p50_ms",
    "latency_p95_ms", "messages_total", "bytes_total", "rejected_gradients", "encounter_pairs",
    "colliding_pairs", "decisions", "reflexive_decisions", "regional_messages_per_tick", "compute_p50_ms",
    "audit_records", "final_model_loss", "model_norm_ratio", "mean_epsilon", "mean_theta",
]


def fmt(v) -> str:
    """Locale-independent, round-trippable text for a CSV cell."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_row(report: MetricsReport) -> list[str]:
    data = {**asdict(report), **report.labels, "schema_version": SCHEMA_VERSION}
    return [fmt(data.get(c)) for c in CSV_COLUMNS]


def write_csv(reports: Iterable[MetricsReport], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in reports:
        w.writerow(csv_row(r))
    return buf.getvalue()


def _latency(t) -> float:
    return t.latency if isinstance(t, DecisionTrace) else float(t)


def compute_metrics(events: RunEvents, traces: Sequence, missions: Sequence[MissionSpec]) -> MetricsReport:
    """Reduce a finished run.

    ``traces`` are :class:`DecisionTrace` objects or bare latencies in seconds.
    A mission succeeds when its UAV arrived within the budget and was never
    part of a collision.
    """
    enc = len(events.encounter_pairs | events.collision_pairs)
    col = len(events.collision_pairs)
    rate = 100.0 * col / enc if enc else 0.0
    collided = {u for p in events.collision_pairs for u in p}
    ok = sum(1 for m in missions
             if m.uav_id in events.arrivals and events.arrivals[m.uav_id] <= m.time_budget
             and m.uav_id not in collided)
    success = 100.0 * ok / len(missions) if missions else 0.0
    lat_ms = [1000.0 * _latency(t) for t in traces]
    near = len(events.near_miss_pairs - events.collision_pairs)
    eps = events.epsilon_trace
    thetas = [th for _, _, th in events.threat_trace]
    return MetricsReport(
        collision_rate=rate,
        near_miss_count=near,
        mission_success_rate=success,
        latency_p50_ms=nearest_rank(lat_ms, 50),
        latency_p95_ms=nearest_rank(lat_ms, 95),
        messages_total=events.messages_total,
        bytes_total=events.bytes_total,
        rejected_gradients=events.rejected_gradients,
        threat_score_trace=[list(x) for x in events.threat_trace],
        encounter_pairs=enc,
        colliding_pairs=col,
        decisions=len(lat_ms),
        reflexive_decisions=events.reflexive_decisions,
        regional_messages_per_tick=events.regional_messages / events.decision_ticks if events.decision_ticks else 0.0,
        compute_p50_ms=nearest_rank(events.compute_ms, 50),
        audit_records=events.audit_records,
        final_model_loss=events.final_model_loss,
        model_norm_ratio=events.model_norm_ratio,
        mean_epsilon=sum(eps) / len(eps) if eps else 0.0,
        mean_theta=sum(thetas) / len(thetas) if thetas else 0.0,
        epsilon_trace=list(eps),
    )
