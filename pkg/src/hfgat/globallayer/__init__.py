"""Swarm-wide layer: gossip consensus, DHT audit storage, logging cost model."""

from .audit import AuditRecord, generate_proof, verify_proof
from .cost import LoggingCostModel, logging_cost
from .dht import DhtNetwork, dht_lookup, dht_store
from .gossip import (GossipEvent, GossipNetwork, GossipNode, gossip_round, simulate_consensus,
                     virtual_vote_order)

__all__ = [
    "AuditRecord", "generate_proof", "verify_proof",
    "LoggingCostModel", "logging_cost",
    "DhtNetwork", "dht_lookup", "dht_store",
    "GossipEvent", "GossipNetwork", "GossipNode", "gossip_round", "simulate_consensus", "virtual_vote_order",
]
