"""Deterministic discrete-event message scheduling and modelled decision latency.

Events are totally ordered by ``(deliver_at, sequence)`` where ``sequence`` is
the insertion counter, so simultaneous deliveries come out in send order.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Mapping

import numpy as np

from .core import RngStream

Outcome = Literal["delivered", "dropped_loss", "dropped_range"]


@dataclass(frozen=True)
class LinkModel:
    base_latency: float = 0.005
    jitter: float = 0.002
    loss_prob: float = 0.01
    comm_radius: float = 1000.0

    def __post_init__(self):
        if self.base_latency < 0 or self.jitter < 0:
            raise ValueError("latencies must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")

    def with_extra_loss(self, extra: float) -> "LinkModel":
        return LinkModel(self.base_latency, self.jitter, min(1.0, self.loss_prob + extra), self.comm_radius)


@dataclass(frozen=True)
class ComputeCostModel:
    """Modelled compute time per layer (seconds).

    Local attention costs ``c_local * neighbours**2``; regional sparse
    attention ``c_regional * k``; one consensus round ``c_global``; the
    centralised coordinator ``c_central_pair`` per UAV pair.
    """

    c_local: float = 80e-6
    c_regional: float = 300e-6
    c_global: float = 5e-3
    c_central_pair: float = 0.2e-6

    def __post_init__(self):
        if min(self.c_local, self.c_regional, self.c_global, self.c_central_pair) < 0:
            raise ValueError("compute costs must be non-negative")


@dataclass(order=True)
class SimEvent:
    deliver_at: float
    sequence: int
    kind: str = field(compare=False, default="message")
    src: int = field(compare=False, default=-1)
    dst: int = field(compare=False, default=-1)
    nbytes: int = field(compare=False, default=0)
    payload: Any = field(compare=False, default=None)
    sent_at: float = field(compare=False, default=0.0)


@dataclass
class Message:
    src: int
    dst: int
    nbytes: int = 0
    kind: str = "message"
    payload: Any = None


class EventQueue:
    """Priority queue of pending deliveries with a simulation clock."""

    def __init__(self, start: float = 0.0, log: bool = False):
        self.now = float(start)
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.log_enabled = log
        self.log: list[tuple[float, str, int, int, int, str]] = []
        self.counts = {"sent": 0, "delivered": 0, "dropped_loss": 0, "dropped_range": 0}
        self.bytes_sent = 0
        self.kind_counts: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._heap)

    def _record(self, t: float, kind: str, src: int, dst: int, nbytes: int, outcome: str) -> None:
        if self.log_enabled:
            self.log.append((t, kind, src, dst, nbytes, outcome))

    def schedule(self, deliver_at: float, kind: str = "timer", src: int = -1, dst: int = -1,
                 nbytes: int = 0, payload: Any = None) -> SimEvent:
        ev = SimEvent(max(deliver_at, self.now), self._seq, kind, src, dst, nbytes, payload, self.now)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def transmit(self, src: int, dst: int, nbytes: int, kind: str, payload: Any,
                 distance: float, link: LinkModel, rng: RngStream) -> SimEvent | Outcome:
        """Send with a precomputed distance; returns the scheduled event or a drop outcome."""
        self.counts["sent"] += 1
        self.bytes_sent += nbytes
        self.kind_counts[kind] = self.kind_counts.get(kind, 0) + 1
        if distance > link.comm_radius:
            self.counts["dropped_range"] += 1
            self._record(self.now, kind, src, dst, nbytes, "dropped_range")
            return "dropped_range"
        if link.loss_prob > 0 and rng.gen.random() < link.loss_prob:
            self.counts["dropped_loss"] += 1
            self._record(self.now, kind, src, dst, nbytes, "dropped_loss")
            return "dropped_loss"
        delay = link.base_latency
        if link.jitter > 0:
            delay += link.jitter * (2.0 * rng.gen.random() - 1.0)
        ev = SimEvent(self.now + max(delay, 0.0), self._seq, kind, src, dst, nbytes, payload, self.now)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def advance(self, until: float) -> list[SimEvent]:
        """Deliver every event due at or before ``until`` and move the clock there."""
        if until < self.now:
            raise ValueError("cannot advance the clock backwards")
        out = []
        heap = self._heap
        while heap and heap[0].deliver_at <= until:
            ev = heapq.heappop(heap)
            self.now = ev.deliver_at
            if ev.kind != "timer":
                self.counts["delivered"] += 1
                self._record(ev.deliver_at, ev.kind, ev.src, ev.dst, ev.nbytes, "delivered")
            out.append(ev)
        self.now = until
        return out

    def conserved(self) -> bool:
        c = self.counts
        return c["sent"] == c["delivered"] + c["dropped_loss"] + c["dropped_range"] + \
            sum(1 for e in self._heap if e.kind != "timer")

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "kind", "src", "dst", "bytes", "outcome"])
        for t, kind, src, dst, nbytes, outcome in self.log:
            w.writerow([repr(float(t)), kind, src, dst, nbytes, outcome])
        return buf.getvalue()


def send(queue: EventQueue, msg: Message, link: LinkModel,
         positions: Mapping[int, Iterable[float]], rng: RngStream) -> SimEvent | Outcome:
    """Schedule ``msg`` subject to range, loss and jitter."""
    d = float(np.linalg.norm(np.asarray(positions[msg.src], float) - np.asarray(positions[msg.dst], float)))
    return queue.transmit(msg.src, msg.dst, msg.nbytes, msg.kind, msg.payload, d, link, rng)


def advance(queue: EventQueue, until: float) -> list[SimEvent]:
    return queue.advance(until)


@dataclass
class DecisionTrace:
    """What one decision did, for latency accounting and invariants."""

    pipeline: str = "hfgat"
    phases: list[str] = field(default_factory=list)
    local_neighbors: int = 0
    sparse_k: int = 0
    consensus_rounds: int = 0
    central_pairs: int = 0
    network_delays: list[float] = field(default_factory=list)
    extra_latency: float = 0.0
    local_only: bool = False
    gradient_submitted: bool = False
    epsilon: float | None = None
    theta_threat: float | None = None
    critical: bool = False
    latency: float = 0.0


def decision_latency(trace: DecisionTrace | None, cost: ComputeCostModel = ComputeCostModel(),
                     link_samples: Iterable[float] = ()) -> float:
    """Sum of modelled compute along the decision's path plus critical-path network delays.

    ``link_samples`` are extra delays (e.g. round-trip legs) appended to those
    already recorded on the trace.
    """
    extra_net = float(sum(link_samples))
    if trace is None:
        return extra_net
    total = 0.0
    if "local" in trace.phases:
        total += cost.c_local * trace.local_neighbors ** 2
    if "regional" in trace.phases:
        total += cost.c_regional * trace.sparse_k
    if trace.consensus_rounds:
        total += cost.c_global * trace.consensus_rounds
    if trace.central_pairs:
        total += cost.c_central_pair * trace.central_pairs
    total += float(sum(trace.network_delays)) + trace.extra_latency + extra_net
    return total


def nearest_rank(values: Iterable[float], pct: float) -> float:
    """Nearest-rank percentile: the ``ceil(pct/100 * n)``-th smallest value."""
    xs = sorted(values)
    if not xs:
        return 0.0
    rank = max(1, math.ceil(pct * len(xs) / 100.0))
    return xs[rank - 1]
