"""Hierarchical federated graph-attention collision avoidance for UAV swarms."""

__version__ = "0.1.0"
