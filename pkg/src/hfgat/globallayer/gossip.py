"""Gossip-about-gossip event DAG with an ancestry-threshold commit rule.

This is a deliberately simplified ordering protocol, not Hashgraph: there
are no rounds, witnesses or fame.  A decision carried by event ``e`` commits
once events from more than ``2n/3`` distinct creators descend from ``e``.
Its consensus time is the (lower) median, over those creators, of the
creation time of each creator's first event that has ``e`` as an ancestor.
Committed decisions are ordered by ``(consensus time, event hash)``.

Event wire layout::

    u32 creator | u8 parent_mask | [32B self_parent] | [32B other_parent]
    | f64 created_at | u8 has_payload | [u32 len | payload] | 32B hash
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping

from ..core import RngStream
from .audit import digest

Behavior = Literal["honest", "silent", "conflicting"]


def _event_body(creator: int, self_parent: bytes | None, other_parent: bytes | None,
                payload: bytes | None, created_at: float) -> bytes:
    mask = (1 if self_parent else 0) | (2 if other_parent else 0)
    out = struct.pack("<IB", creator, mask)
    if self_parent:
        out += self_parent
    if other_parent:
        out += other_parent
    out += struct.pack("<dB", created_at, 1 if payload is not None else 0)
    if payload is not None:
        out += struct.pack("<I", len(payload)) + payload
    return out


@dataclass(frozen=True)
class GossipEvent:
    creator: int
    self_parent: bytes | None
    other_parent: bytes | None
    payload: bytes | None
    created_at: float
    hash: bytes = b""

    def __post_init__(self):
        h = digest(_event_body(self.creator, self.self_parent, self.other_parent,
                               self.payload, self.created_at))
        if self.hash and self.hash != h:
            raise ValueError("gossip event hash does not match its contents")
        object.__setattr__(self, "hash", h)

    @property
    def parents(self) -> tuple[bytes, ...]:
        return tuple(p for p in (self.self_parent, self.other_parent) if p)

    def to_bytes(self) -> bytes:
        return _event_body(self.creator, self.self_parent, self.other_parent,
                           self.payload, self.created_at) + self.hash

    @classmethod
    def from_bytes(cls, data: bytes) -> "GossipEvent":
        creator, mask = struct.unpack_from("<IB", data)
        off = 5
        sp = op = None
        if mask & 1:
            sp, off = data[off:off + 32], off + 32
        if mask & 2:
            op, off = data[off:off + 32], off + 32
        created_at, has_payload = struct.unpack_from("<dB", data, off)
        off += 9
        payload = None
        if has_payload:
            (n,) = struct.unpack_from("<I", data, off)
            off += 4
            payload, off = data[off:off + n], off + n
        h = data[off:]
        if len(h) != 32:
            raise ValueError("truncated gossip event")
        return cls(creator, sp, op, payload, created_at, h)


@dataclass
class GossipNode:
    node_id: int
    behavior: Behavior = "honest"
    events: dict[bytes, GossipEvent] = field(default_factory=dict)
    order: list[bytes] = field(default_factory=list)
    latest: bytes | None = None
    clock_skew: float = 0.0

    @property
    def alive(self) -> bool:
        return self.behavior != "silent"

    def add_event(self, ev: GossipEvent) -> None:
        if ev.hash in self.events:
            return
        for p in ev.parents:
            if p not in self.events:
                raise ValueError("event parent unknown; DAG order violated")
        self.events[ev.hash] = ev
        self.order.append(ev.hash)

    def create_event(self, now: float, other_parent: bytes | None = None,
                     payload: bytes | None = None) -> GossipEvent:
        ev = GossipEvent(self.node_id, self.latest, other_parent, payload, now + self.clock_skew)
        self.add_event(ev)
        self.latest = ev.hash
        return ev

    def propose(self, payload: bytes, now: float) -> GossipEvent:
        return self.create_event(now, None, payload)

    def missing_from(self, other: "GossipNode") -> list[GossipEvent]:
        return [other.events[h] for h in other.order if h not in self.events]


def gossip_round(node: GossipNode, peer: GossipNode, now: float) -> tuple[GossipEvent, GossipEvent] | None:
    """Two-way sync; afterwards each side creates one event referencing the other.

    Returns the two new events, or ``None`` when either side is unreachable.
    """
    if not (node.alive and peer.alive) or node is peer:
        return None
    to_node = node.missing_from(peer)
    to_peer = peer.missing_from(node)
    for ev in to_node:
        node.add_event(ev)
    for ev in to_peer:
        peer.add_event(ev)
    node_tip, peer_tip = node.latest, peer.latest
    return node.create_event(now, peer_tip), peer.create_event(now, node_tip)


@dataclass(frozen=True)
class CommittedDecision:
    payload: bytes
    event_hash: bytes
    consensus_time: float
    creator: int


def _topological(events: Mapping[bytes, GossipEvent]) -> list[bytes]:
    indeg: dict[bytes, int] = {}
    children: dict[bytes, list[bytes]] = {}
    for h, ev in events.items():
        ps = [p for p in ev.parents if p in events]
        indeg[h] = len(ps)
        for p in ps:
            children.setdefault(p, []).append(h)
    ready = sorted(h for h, d in indeg.items() if d == 0)
    out = []
    while ready:
        h = ready.pop()
        out.append(h)
        for c in children.get(h, ()):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(out) != len(events):
        raise ValueError("gossip DAG has a cycle or dangling parents")
    return out


def first_seen_times(events: Mapping[bytes, GossipEvent]) -> dict[bytes, dict[int, float]]:
    """For every payload-carrying event: creator -> creation time of its first descendant."""
    topo = _topological(events)
    decisions = sorted(h for h, ev in events.items() if ev.payload is not None)
    bit = {h: 1 << i for i, h in enumerate(decisions)}
    masks: dict[bytes, int] = {}
    seen_by: dict[int, int] = {}
    fs: dict[bytes, dict[int, float]] = {h: {} for h in decisions}
    for h in topo:
        ev = events[h]
        m = bit.get(h, 0)
        for p in ev.parents:
            m |= masks.get(p, 0)
        masks[h] = m
        new = m & ~seen_by.get(ev.creator, 0)
        if new:
            seen_by[ev.creator] = seen_by.get(ev.creator, 0) | new
            for d in decisions:
                if new & bit[d]:
                    fs[d][ev.creator] = ev.created_at
    return fs


def virtual_vote_order(events: Mapping[bytes, GossipEvent], n: int, f: int) -> list[CommittedDecision]:
    """Committed decisions in consensus order for the given DAG."""
    if not 3 * f < n:
        raise ValueError("need f < n/3")
    fs = first_seen_times(events)
    out = []
    for h, seen in fs.items():
        if 3 * len(seen) <= 2 * n:
            continue
        times = sorted(seen.values())
        ts = times[(len(times) - 1) // 2]
        ev = events[h]
        out.append(CommittedDecision(ev.payload, h, ts, ev.creator))
    out.sort(key=lambda d: (d.consensus_time, d.event_hash))
    return out


@dataclass
class GossipNetwork:
    """Nodes plus a random-peer gossip driver."""

    nodes: list[GossipNode]
    rng: RngStream
    now: float = 0.0
    round_period: float = 0.01

    @classmethod
    def create(cls, n: int, seed: int = 0, behaviors: Iterable[Behavior] | None = None) -> "GossipNetwork":
        bs = list(behaviors) if behaviors is not None else ["honest"] * n
        nodes = [GossipNode(i, bs[i]) for i in range(n)]
        net = cls(nodes, RngStream.keyed(seed, "gossip"))
        for node in nodes:
            if node.alive:
                node.create_event(0.0)
        return net

    @property
    def honest(self) -> list[GossipNode]:
        return [x for x in self.nodes if x.behavior == "honest"]

    def step(self) -> int:
        """One round: every live node syncs with one uniformly random other node."""
        self.now += self.round_period
        synced = 0
        n = len(self.nodes)
        for node in self.nodes:
            if not node.alive:
                continue
            j = int(self.rng.gen.integers(n - 1))
            if j >= node.node_id:
                j += 1
            if gossip_round(node, self.nodes[j], self.now) is not None:
                synced += 1
        return synced


def quiescent(net: GossipNetwork) -> bool:
    """Every honest node has seen every payload event descend into every live creator."""
    live = {x.node_id for x in net.nodes if x.alive}
    views = [first_seen_times(node.events) for node in net.honest]
    keys = set(views[0])
    return all(set(v) == keys for v in views) and all(set(s) == live for v in views for s in v.values())


def simulate_consensus(n: int, decisions: int, behaviors: Iterable[Behavior], seed: int = 0,
                       max_settle: int = 400) -> dict[int, list[bytes]]:
    """Propose ``decisions`` payloads at random honest nodes, one per round, then gossip to quiescence.

    Conflicting nodes propose a rival payload for every decision index.
    Returns each honest node's committed payload sequence.
    """
    bs = list(behaviors)
    f = sum(1 for b in bs if b != "honest")
    net = GossipNetwork.create(n, seed, bs)
    pick = RngStream.keyed(seed, "gossip-proposer")
    honest = net.honest
    for d in range(decisions):
        node = honest[int(pick.gen.integers(len(honest)))]
        node.propose(f"decision-{d}".encode(), net.now)
        for bad in net.nodes:
            if bad.behavior == "conflicting":
                bad.propose(f"decision-{d}:rival-{bad.node_id}".encode(), net.now)
        net.step()
    for r in range(max_settle):
        net.step()
        if r % 5 == 4 and quiescent(net):
            break
    return {node.node_id: [c.payload for c in virtual_vote_order(node.events, n, f)] for node in honest}
