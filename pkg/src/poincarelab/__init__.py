"""Certified Poincare constants, capacities and profiles for graphs and groups."""
from __future__ import annotations

__version__ = "0.1.0"

from .graphkit import FamilySpec, WeightedGraph, build_family, read_graph, write_graph
from .poincare import BoundInterval, CapConfig, HpConfig, capacity_bounds, hp_bounds

__all__ = [
    "BoundInterval", "CapConfig", "FamilySpec", "HpConfig", "WeightedGraph", "__version__",
    "build_family", "capacity_bounds", "hp_bounds", "read_graph", "write_graph",
]
