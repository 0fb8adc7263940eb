"""Fog/cloud service placement driven by measured response times."""

from fograph.errors import FogError
from fograph.metrics import AbsolutePolicy, Band, MetricsStore, PiRecord, PriorityMap, QuantilePolicy, RtSample, classify
from fograph.placement import PlacementDecision, PlacementPolicy, eligible_nodes, provider_place, redirect, select_host
from fograph.registry import (
    Granularity,
    NodeDescriptor,
    Plane,
    Registration,
    Registry,
    Role,
    Security,
    ServiceDescriptor,
)
from fograph.legacy import LegacyService, wrap_legacy

__version__ = "0.1.0"

__all__ = [
    "AbsolutePolicy",
    "Band",
    "FogError",
    "Granularity",
    "LegacyService",
    "MetricsStore",
    "NodeDescriptor",
    "PiRecord",
    "PlacementDecision",
    "PlacementPolicy",
    "Plane",
    "PriorityMap",
    "QuantilePolicy",
    "Registration",
    "Registry",
    "Role",
    "RtSample",
    "Security",
    "ServiceDescriptor",
    "classify",
    "eligible_nodes",
    "provider_place",
    "redirect",
    "select_host",
    "wrap_legacy",
]
