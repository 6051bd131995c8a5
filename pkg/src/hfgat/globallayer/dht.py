"""In-process Kademlia DHT with iterative lookups and message accounting.

Node ids and keys are 160-bit integers; distance is XOR.  Bucket ``b`` of a
node holds peers sharing exactly ``b`` leading bits with it, at most ``K``
per bucket, first-seen kept.

Wire frames (all little-endian)::

    u8 tag | 20B sender | 20B target | u32 len | payload

Tags: PING=0, STORE=1, FIND_NODE=2, FIND_VALUE=3, PONG=4, STORE_ACK=5,
NODES=6 (payload is a concatenation of 20-byte ids), VALUE=7.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

from ..core import RngStream
from .audit import dht_key

ID_BITS = 160
ID_BYTES = 20
DEFAULT_K = 4
DEFAULT_ALPHA = 3

_FRAME = struct.Struct("<B20s20sI")


class Tag(IntEnum):
    PING = 0
    STORE = 1
    FIND_NODE = 2
    FIND_VALUE = 3
    PONG = 4
    STORE_ACK = 5
    NODES = 6
    VALUE = 7


def encode_frame(tag: Tag, sender: int, target: int, payload: bytes = b"") -> bytes:
    return _FRAME.pack(int(tag), sender.to_bytes(ID_BYTES, "big"), target.to_bytes(ID_BYTES, "big"),
                       len(payload)) + payload


def decode_frame(data: bytes) -> tuple[Tag, int, int, bytes]:
    if len(data) < _FRAME.size:
        raise ValueError("truncated DHT frame")
    tag, sender, target, n = _FRAME.unpack_from(data)
    payload = data[_FRAME.size:]
    if len(payload) != n:
        raise ValueError("DHT frame payload length mismatch")
    return Tag(tag), int.from_bytes(sender, "big"), int.from_bytes(target, "big"), payload


def frame_size(payload_len: int = 0) -> int:
    return _FRAME.size + payload_len


def node_id_for(label: str | int) -> int:
    return int.from_bytes(dht_key(str(label).encode()), "big")


def key_to_int(key: bytes | int) -> int:
    return key if isinstance(key, int) else int.from_bytes(key, "big")


def shared_prefix(a: int, b: int) -> int:
    return ID_BITS - (a ^ b).bit_length()


@dataclass
class DhtNode:
    node_id: int
    k: int = DEFAULT_K
    buckets: dict[int, list[int]] = field(default_factory=dict)
    store: dict[int, bytes] = field(default_factory=dict)

    def add_peer(self, peer: int) -> bool:
        if peer == self.node_id:
            return False
        b = shared_prefix(self.node_id, peer)
        bucket = self.buckets.setdefault(b, [])
        if peer in bucket or len(bucket) >= self.k:
            return False
        bucket.append(peer)
        return True

    def peers(self) -> list[int]:
        return [p for b in self.buckets.values() for p in b]

    def closest(self, target: int, count: int) -> list[int]:
        """``count`` closest known ids to ``target`` including this node."""
        known = self.peers() + [self.node_id]
        known.sort(key=lambda x: x ^ target)
        return known[:count]


@dataclass
class LookupResult:
    closest: list[int]
    hops: int
    messages: int
    bytes: int
    value: bytes | None = None
    distances: list[int] = field(default_factory=list)


class DhtNetwork:
    """A set of nodes with full bootstrap and iterative lookups."""

    def __init__(self, ids: Iterable[int], k: int = DEFAULT_K, alpha: int = DEFAULT_ALPHA,
                 rng: RngStream | None = None):
        self.k = k
        self.alpha = alpha
        self.nodes: dict[int, DhtNode] = {i: DhtNode(i, k) for i in ids}
        if not self.nodes:
            raise ValueError("a DHT needs at least one node")
        self.messages = 0
        self.bytes = 0
        self._bootstrap(rng or RngStream(0, 0))

    @classmethod
    def of_size(cls, n: int, seed: int = 0, **kw) -> "DhtNetwork":
        return cls([node_id_for(f"node-{seed}-{i}") for i in range(n)],
                   rng=RngStream.keyed(seed, "dht-bootstrap"), **kw)

    def _bootstrap(self, rng: RngStream) -> None:
        ids = sorted(self.nodes)
        for nid in ids:
            order = rng.gen.permutation(len(ids))
            node = self.nodes[nid]
            for j in order:
                node.add_peer(ids[j])

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def hop_bound(self) -> int:
        return math.ceil(math.log2(len(self.nodes))) + 2 if len(self.nodes) > 1 else 0

    def brute_force_closest(self, key: bytes | int, count: int | None = None) -> list[int]:
        t = key_to_int(key)
        return sorted(self.nodes, key=lambda x: x ^ t)[: count or self.k]

    def _iterate(self, origin: int, target: int, want_value: bool) -> LookupResult:
        origin_node = self.nodes[origin]
        k, alpha = self.k, self.alpha
        if want_value and target in origin_node.store:
            return LookupResult([origin], 0, 0, 0, origin_node.store[target])
        shortlist = set(origin_node.closest(target, k))
        queried = {origin}
        hops = messages = nbytes = 0
        distances: list[int] = []
        while True:
            ranked = sorted(shortlist, key=lambda x: x ^ target)[:k]
            pending = [x for x in ranked if x not in queried]
            if not pending:
                break
            hops += 1
            for peer in pending[:alpha]:
                queried.add(peer)
                node = self.nodes[peer]
                messages += 2
                nbytes += frame_size()
                if want_value and target in node.store:
                    value = node.store[target]
                    nbytes += frame_size(len(value))
                    self.messages += messages
                    self.bytes += nbytes
                    distances.append(min(x ^ target for x in shortlist | {peer}))
                    return LookupResult(ranked, hops, messages, nbytes, value, distances)
                found = node.closest(target, k)
                nbytes += frame_size(ID_BYTES * len(found))
                shortlist.update(found)
            distances.append(min(x ^ target for x in shortlist))
        self.messages += messages
        self.bytes += nbytes
        return LookupResult(sorted(shortlist, key=lambda x: x ^ target)[:k], hops, messages, nbytes,
                            None, distances)

    def find_nodes(self, origin: int, key: bytes | int) -> LookupResult:
        return self._iterate(origin, key_to_int(key), want_value=False)

    def store(self, origin: int, key: bytes | int, value: bytes) -> tuple[set[int], LookupResult]:
        """Store ``value`` on the ``K`` nodes closest to ``key``."""
        target = key_to_int(key)
        res = self.find_nodes(origin, target)
        for nid in res.closest:
            self.nodes[nid].store[target] = value
            if nid != origin:
                res.messages += 2
                res.bytes += frame_size(len(value)) + frame_size()
        self.messages += 2 * sum(1 for nid in res.closest if nid != origin)
        self.bytes += sum(frame_size(len(value)) + frame_size() for nid in res.closest if nid != origin)
        return set(res.closest), res

    def lookup(self, origin: int, key: bytes | int) -> LookupResult:
        return self._iterate(origin, key_to_int(key), want_value=True)


def dht_store(net: DhtNetwork, origin: int, key: bytes | int, value: bytes) -> set[int]:
    return net.store(origin, key, value)[0]


def dht_lookup(net: DhtNetwork, origin: int, key: bytes | int) -> bytes | None:
    return net.lookup(origin, key).value
