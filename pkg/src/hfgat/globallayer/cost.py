"""Audit-logging cost model: DHT storage versus a blockchain-style baseline.

Per logged event, with swarm size ``n``, ``h = ceil(log2 n)`` lookup hops and
``K`` replicas:

* ``dht``: ``h + K`` messages (``h`` FIND_NODE requests then ``K`` STOREs);
  bytes ``h * FIND_NODE frame + K * STORE frame``; latency ``(h + 1)`` link
  round trips (replica stores run in parallel).
* ``blockchain_model``: a full broadcast of the record to ``n - 1`` peers plus a
  commit round of ``n - 1`` votes; bytes ``(n - 1) * STORE frame +
  (n - 1) * vote frame``; latency one link leg plus the fixed commit time.

Both modes carry the same serialised audit record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .audit import DIGEST_SIZE, record_size
from .dht import DEFAULT_K, frame_size


@dataclass(frozen=True)
class LoggingCostModel:
    n: int = 100
    k: int = DEFAULT_K
    link_latency: float = 0.005
    commit_latency: float = 0.5
    record_bytes: int = record_size()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("swarm size must be positive")

    @property
    def hops(self) -> int:
        return math.ceil(math.log2(self.n)) if self.n > 1 else 0


def logging_cost(event_count: int, mode: Literal["dht", "blockchain_model"],
                 model: LoggingCostModel = LoggingCostModel()) -> tuple[int, int, float]:
    """Total ``(messages, bytes, latency_s)`` for logging ``event_count`` events.

    Latency is per event (events are logged independently), zero when no
    events are logged.
    """
    if event_count < 0:
        raise ValueError("event_count must be non-negative")
    if event_count == 0:
        return 0, 0, 0.0
    store_frame = frame_size(model.record_bytes)
    if mode == "dht":
        h = model.hops
        replicas = min(model.k, model.n)
        remote = replicas if model.n > 1 else 0
        msgs = h + remote
        nbytes = h * frame_size() + remote * store_frame
        latency = (h + (1 if remote else 0)) * 2 * model.link_latency
    elif mode == "blockchain_model":
        peers = model.n - 1
        msgs = 2 * peers
        nbytes = peers * store_frame + peers * frame_size(DIGEST_SIZE)
        latency = model.link_latency + model.commit_latency
    else:
        raise ValueError(f"unknown logging mode {mode!r}")
    return event_count * msgs, event_count * nbytes, latency
