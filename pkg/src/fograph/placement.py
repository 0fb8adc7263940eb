"""Granularity/security placement rules and response-time driven host choice.

Three decisions live here:

* where a provider may (``eligible_nodes``) and should (``provider_place``)
  register a service;
* which registered host a client should call (``select_host``: lowest PI);
* topology-based redirection (``redirect``: nearest host first, then PI).

Unmeasured hosts never win while a measured candidate exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Collection, Mapping

from fograph.errors import NoEligibleNode, NoMeasurements, NotFound, Unreachable, UnknownNode
from fograph.metrics import PiRecord
from fograph.registry import Granularity, Plane, Registration, Security, ServiceDescriptor

if TYPE_CHECKING:
    from fograph.registry import Registry
    from fograph.topology import Topology


@dataclass(frozen=True)
class PlacementPolicy:
    confidential_fog_only: bool = True
    mega_prefers_premises: bool = True
    max_mega_hops_from_premises: int = 1
    strict_measured: bool = False

    def __post_init__(self) -> None:
        if self.max_mega_hops_from_premises < 0:
            raise ValueError("max_mega_hops_from_premises must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "confidential_fog_only": self.confidential_fog_only,
            "mega_prefers_premises": self.mega_prefers_premises,
            "max_mega_hops_from_premises": self.max_mega_hops_from_premises,
            "strict_measured": self.strict_measured,
        }


class Reason(str, Enum):
    LOWEST_PI = "lowest_pi"
    ONLY_ELIGIBLE = "only_eligible"
    NEAREST_PREMISES = "nearest_premises"
    UNMEASURED_FALLBACK = "unmeasured_fallback"


@dataclass(frozen=True)
class PlacementDecision:
    service_id: str
    chosen_node_id: str
    eligible_node_ids: list[str]
    reason: Reason
    client_node_id: str | None = None
    kind: str = "provider"

    def __post_init__(self) -> None:
        if self.chosen_node_id not in self.eligible_node_ids:
            raise ValueError(f"{self.chosen_node_id!r} is not among the eligible nodes")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "service_id": self.service_id,
            "client_node_id": self.client_node_id,
            "chosen_node_id": self.chosen_node_id,
            "eligible_node_ids": list(self.eligible_node_ids),
            "reason": self.reason.value,
        }


def pi_value(pi_table: Mapping[str, Any], node_id: str):
    """PI of ``node_id`` from a table of PiRecords or bare numbers; None if unmeasured."""
    entry = pi_table.get(node_id)
    if isinstance(entry, PiRecord):
        return entry.pi_ms if entry.measured else None
    return entry


@dataclass
class _Eligibility:
    nodes: list[str]
    premises_fallback: bool = False
    hops: dict[str, int] = field(default_factory=dict)


def _eligibility(
    service: ServiceDescriptor,
    topology: Topology,
    policy: PlacementPolicy,
    client_node_id: str | None,
    among: Collection[str] | None = None,
) -> _Eligibility:
    if not topology.nodes:
        raise NoEligibleNode("topology has no nodes")
    candidates = list(topology.nodes)
    if among is not None:
        candidates = [n for n in candidates if n.node_id in among]
    fallback = False
    if service.security is Security.CONFIDENTIAL and policy.confidential_fog_only:
        candidates = [n for n in candidates if n.plane is Plane.FOG]
    if service.granularity is Granularity.MEGA and policy.mega_prefers_premises:
        candidates = [n for n in candidates if n.plane is Plane.FOG]
        premises = topology.node(client_node_id).premises_id if client_node_id else None
        if premises is not None:
            local = [n for n in candidates if n.premises_id == premises]
            if local:
                candidates = local
            else:
                fallback = True
                limit = policy.max_mega_hops_from_premises
                candidates = [
                    n for n in candidates
                    if _premises_hops(topology, premises, n.premises_id) <= limit
                ]
    if not candidates:
        raise NoEligibleNode(
            f"no node may host {service.name!r} "
            f"({service.granularity.value}/{service.security.value})"
            + (f" for client {client_node_id!r}" if client_node_id else "")
        )
    hops = topology.hops_from(client_node_id) if client_node_id else {}
    inf = float("inf")
    candidates.sort(key=lambda n: (n.plane is not Plane.FOG, hops.get(n.node_id, inf) if client_node_id else 0, n.node_id))
    return _Eligibility([n.node_id for n in candidates], fallback, hops)


def _premises_hops(topology: Topology, a: str, b: str) -> float:
    try:
        return topology.premises_hops(a, b)
    except (Unreachable, UnknownNode):
        return float("inf")


def eligible_nodes(
    service: ServiceDescriptor,
    topology: Topology,
    policy: PlacementPolicy | None = None,
    client_node_id: str | None = None,
    among: Collection[str] | None = None,
) -> list[str]:
    """Nodes allowed to host ``service``, ordered fog first, then hop distance, then id.

    Confidential services stay on fog nodes. Mega services stay on fog nodes
    of the client's premises, or, if it has none, on fog nodes whose access
    router is within ``max_mega_hops_from_premises`` hops of the client's.
    Without a client, hop distance is not used and Mega services may go on
    any fog node. ``among`` restricts the candidates before these rules run,
    so the premises fallback applies to the hosts that actually exist.
    """
    return _eligibility(service, topology, policy or PlacementPolicy(), client_node_id, among).nodes


def _argmin(candidates: list[str], pi_table: Mapping[str, Any]) -> str | None:
    measured = [(pi_value(pi_table, n), n) for n in candidates if pi_value(pi_table, n) is not None]
    if not measured:
        return None
    return min(measured)[1]


def provider_place(
    service: ServiceDescriptor,
    topology: Topology,
    pi_table: Mapping[str, Any],
    policy: PlacementPolicy | None = None,
    client_node_id: str | None = None,
) -> PlacementDecision:
    """Pick the eligible node with the lowest PI for a provider to register on."""
    policy = policy or PlacementPolicy()
    elig = _eligibility(service, topology, policy, client_node_id)
    chosen = _argmin(elig.nodes, pi_table)
    if chosen is None:
        if policy.strict_measured:
            raise NoMeasurements(f"no eligible node for {service.name!r} has been measured")
        chosen = elig.nodes[0]
        reason = Reason.ONLY_ELIGIBLE if len(elig.nodes) == 1 else Reason.UNMEASURED_FALLBACK
    elif len(elig.nodes) == 1:
        reason = Reason.ONLY_ELIGIBLE
    elif elig.premises_fallback:
        reason = Reason.NEAREST_PREMISES
    else:
        reason = Reason.LOWEST_PI
    return PlacementDecision(service.service_id, chosen, elig.nodes, reason, client_node_id, "provider")


def candidate_registrations(
    client_node_id: str | None,
    service_name: str,
    registry: Registry,
    topology: Topology | None,
    policy: PlacementPolicy,
) -> list[tuple[Registration, ServiceDescriptor]]:
    regs = registry.live_registrations(service_name)
    if not regs:
        raise NotFound(f"no live registration for {service_name!r}")
    hosts: dict[str, set[str]] = {}
    for reg in regs:
        hosts.setdefault(reg.service_id, set()).add(reg.node_id)
    out = []
    allowed: dict[str, set[str]] = {}
    for reg in regs:
        svc = registry.service(reg.service_id)
        if topology is not None:
            if svc.service_id not in allowed:
                try:
                    allowed[svc.service_id] = set(
                        eligible_nodes(svc, topology, policy, client_node_id, among=hosts[svc.service_id])
                    )
                except NoEligibleNode:
                    allowed[svc.service_id] = set()
            if reg.node_id not in allowed[svc.service_id]:
                continue
        out.append((reg, svc))
    if not out:
        raise NoEligibleNode(f"no registered host of {service_name!r} is eligible for {client_node_id!r}")
    return out


def select_registration(
    client_node_id: str | None,
    service_name: str,
    registry: Registry,
    pi_table: Mapping[str, Any],
    topology: Topology | None = None,
    policy: PlacementPolicy | None = None,
) -> Registration:
    """Lowest-PI live registration of ``service_name`` that the client may use.

    Ties go to the smaller node_id. With no measured candidate, the first
    candidate in eligibility order is returned unless ``strict_measured``.
    """
    policy = policy or PlacementPolicy()
    cands = candidate_registrations(client_node_id, service_name, registry, topology, policy)
    measured = [
        (pi_value(pi_table, reg.node_id), reg.node_id, reg.registration_id, reg)
        for reg, _ in cands
        if pi_value(pi_table, reg.node_id) is not None
    ]
    if measured:
        return min(measured, key=lambda t: t[:3])[3]
    if policy.strict_measured:
        raise NoMeasurements(f"every host of {service_name!r} is unmeasured")
    if topology is not None:
        hops = topology.hops_from(client_node_id) if client_node_id else {}
        def order(c):
            node = topology.node(c[0].node_id)
            return (node.plane is not Plane.FOG, hops.get(node.node_id, 0), node.node_id, c[0].registration_id)
    else:
        def order(c):
            return (c[0].node_id, c[0].registration_id)
    return min(cands, key=order)[0]


def select_host(
    client_node_id: str | None,
    service_name: str,
    registry: Registry,
    pi_table: Mapping[str, Any],
    topology: Topology | None = None,
    policy: PlacementPolicy | None = None,
) -> str:
    return select_registration(client_node_id, service_name, registry, pi_table, topology, policy).node_id


def redirect_registration(
    client_node_id: str,
    service_name: str,
    registry: Registry,
    topology: Topology,
    pi_table: Mapping[str, Any],
    policy: PlacementPolicy | None = None,
) -> Registration:
    policy = policy or PlacementPolicy()
    if not topology.has_node(client_node_id):
        raise UnknownNode(client_node_id)
    cands = candidate_registrations(client_node_id, service_name, registry, topology, policy)
    hops = topology.hops_from(client_node_id)
    inf = float("inf")

    def rank(c):
        reg = c[0]
        pi = pi_value(pi_table, reg.node_id)
        return (hops.get(reg.node_id, inf), inf if pi is None else pi, reg.node_id, reg.registration_id)

    return min(cands, key=rank)[0]


def redirect(
    client_node_id: str,
    service_name: str,
    registry: Registry,
    topology: Topology,
    pi_table: Mapping[str, Any],
    policy: PlacementPolicy | None = None,
) -> str:
    """Nearest registered host by hop count; PI then node_id break ties."""
    return redirect_registration(client_node_id, service_name, registry, topology, pi_table, policy).node_id
