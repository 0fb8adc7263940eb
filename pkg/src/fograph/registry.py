"""Service and node descriptors plus the in-process lookup registry.

The registry plays the part of a lookup service: providers register a
service on a host, clients look it up either by exact name (unicast, one
best host) or by glob pattern (multicast, every live registration).

Example:
    >>> reg = Registry()
    >>> reg.add_node(NodeDescriptor("tg-slave-1", Plane.FOG, premises_id="lab",
    ...                             role=Role.SLAVE, link=LinkKind.WIRELESS))
    >>> svc = ServiceDescriptor("svc-temp", "temperature-service", Granularity.MINI)
    >>> reg.register(svc, "tg-slave-1").node_id
    'tg-slave-1'
"""

from __future__ import annotations

import dataclasses
import fnmatch
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Iterable, Mapping

from fograph.errors import (
    ConstraintViolation,
    DuplicateRegistration,
    FogError,
    NoEligibleNode,
    NotFound,
    UnknownNode,
    UnknownRegistration,
)

if TYPE_CHECKING:
    from fograph.placement import PlacementPolicy
    from fograph.topology import Topology


class Granularity(str, Enum):
    MINI = "mini"
    MACRO = "macro"
    MEGA = "mega"

    @property
    def rank(self) -> int:
        return _GRANULARITY_RANK[self]


_GRANULARITY_RANK = {Granularity.MINI: 0, Granularity.MACRO: 1, Granularity.MEGA: 2}


class Security(str, Enum):
    PUBLIC = "public"
    CONFIDENTIAL = "confidential"


class Plane(str, Enum):
    FOG = "fog"
    CLOUD = "cloud"


class Role(str, Enum):
    MASTER = "master"
    SLAVE = "slave"
    CLUSTER_FRONTEND = "cluster_frontend"
    CLOUD_DC = "cloud_dc"


class LinkKind(str, Enum):
    WIRED = "wired"
    WIRELESS = "wireless"


class MigrationState(str, Enum):
    LEGACY = "legacy"
    WRAPPED = "wrapped"
    NATIVE = "native"


# Per-request response size used when a service does not state one.
DEFAULT_PAYLOAD_BYTES: dict[Granularity, int] = {
    Granularity.MINI: 1_024,
    Granularity.MACRO: 65_536,
    Granularity.MEGA: 1_048_576,
}


@dataclass(frozen=True)
class ServiceDescriptor:
    """A publishable service.

    ``endpoint`` is only set for services that can actually be invoked in
    process (wrapped legacy services); it never takes part in equality or
    serialization.
    """

    service_id: str
    name: str
    granularity: Granularity
    security: Security = Security.PUBLIC
    payload_bytes: int | None = None
    version: int = 0
    migration_state: MigrationState = MigrationState.NATIVE
    endpoint: Callable[..., Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        object.__setattr__(self, "security", Security(self.security))
        object.__setattr__(self, "migration_state", MigrationState(self.migration_state))
        if not self.service_id:
            raise ValueError("service_id must be non-empty")
        if not self.name:
            raise ValueError("service name must be non-empty")
        if self.payload_bytes is None:
            object.__setattr__(self, "payload_bytes", DEFAULT_PAYLOAD_BYTES[self.granularity])
        if not isinstance(self.payload_bytes, int) or self.payload_bytes < 0:
            raise ValueError(f"payload_bytes must be a non-negative integer, got {self.payload_bytes!r}")
        if not isinstance(self.version, int) or self.version < 0:
            raise ValueError(f"version must be a non-negative integer, got {self.version!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "service_id": self.service_id,
            "name": self.name,
            "granularity": self.granularity.value,
            "security": self.security.value,
            "payload_bytes": self.payload_bytes,
            "version": self.version,
            "migration_state": self.migration_state.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ServiceDescriptor:
        return cls(
            service_id=data["service_id"],
            name=data["name"],
            granularity=Granularity(data["granularity"]),
            security=Security(data.get("security", "public")),
            payload_bytes=data.get("payload_bytes"),
            version=data.get("version", 0),
            migration_state=MigrationState(data.get("migration_state", "native")),
        )


@dataclass(frozen=True)
class NodeDescriptor:
    """A fog or cloud host."""

    node_id: str
    plane: Plane
    premises_id: str | None = None
    role: Role = Role.SLAVE
    link: LinkKind = LinkKind.WIRED
    mobile: bool = False
    cpu_capacity: float = 100.0
    heterogeneity_tag: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "plane", Plane(self.plane))
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "link", LinkKind(self.link))
        if not self.node_id:
            raise ValueError("node_id must be non-empty")
        if self.plane is Plane.CLOUD and self.premises_id is not None:
            raise ValueError(f"cloud node {self.node_id!r} cannot carry a premises_id")
        if self.plane is Plane.FOG and not self.premises_id:
            raise ValueError(f"fog node {self.node_id!r} needs a premises_id")
        if not self.cpu_capacity > 0:
            raise ValueError(f"cpu_capacity of {self.node_id!r} must be positive")

    @property
    def is_fog(self) -> bool:
        return self.plane is Plane.FOG

    def to_dict(self) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "plane": self.plane.value,
            "premises_id": self.premises_id,
            "role": self.role.value,
            "link": self.link.value,
            "mobile": self.mobile,
            "cpu_capacity": self.cpu_capacity,
            "heterogeneity_tag": self.heterogeneity_tag,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NodeDescriptor:
        return cls(
            node_id=data["node_id"],
            plane=Plane(data["plane"]),
            premises_id=data.get("premises_id"),
            role=Role(data.get("role", "slave")),
            link=LinkKind(data.get("link", "wired")),
            mobile=bool(data.get("mobile", False)),
            cpu_capacity=data.get("cpu_capacity", 100.0),
            heterogeneity_tag=data.get("heterogeneity_tag", ""),
        )


@dataclass(frozen=True)
class Registration:
    registration_id: str
    service_id: str
    node_id: str
    registered_at: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


class Registry:
    """Thread-safe store of nodes, services and live registrations.

    Args:
        topology: When given, its nodes are pre-loaded and placement rules are
            checked on every ``register`` call (unless ``enforce_placement``
            is explicitly False).
        policy: Placement policy used for constraint checks and lookups.
        pi_source: Where lookups read Priority Index values from. Either a
            mapping ``node_id -> PiRecord | float | None`` or any object with
            a ``pi_table()`` method (e.g. ``MetricsStore``).
    """

    def __init__(
        self,
        topology: Topology | None = None,
        policy: PlacementPolicy | None = None,
        pi_source: Any = None,
        enforce_placement: bool | None = None,
    ) -> None:
        self._lock = threading.RLock()
        self._nodes: dict[str, NodeDescriptor] = {}
        self._services: dict[str, ServiceDescriptor] = {}
        self._live: dict[str, Registration] = {}
        self._next_id = 1
        self.topology = topology
        self.policy = policy
        self.pi_source = pi_source
        self.enforce_placement = topology is not None if enforce_placement is None else enforce_placement
        if topology is not None:
            for node in topology.nodes:
                self.add_node(node)

    # -- nodes and services -------------------------------------------------

    def add_node(self, node: NodeDescriptor) -> None:
        with self._lock:
            existing = self._nodes.get(node.node_id)
            if existing is not None and existing != node:
                raise FogError(f"node {node.node_id!r} already defined differently")
            self._nodes[node.node_id] = node

    def node(self, node_id: str) -> NodeDescriptor:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    @property
    def nodes(self) -> list[NodeDescriptor]:
        with self._lock:
            return [self._nodes[k] for k in sorted(self._nodes)]

    def service(self, service_id: str) -> ServiceDescriptor:
        try:
            return self._services[service_id]
        except KeyError:
            raise NotFound(f"no service with id {service_id!r}") from None

    def service_for(self, registration: Registration) -> ServiceDescriptor:
        return self.service(registration.service_id)

    # -- mutation -----------------------------------------------------------

    def register(self, service: ServiceDescriptor, node_id: str, at: float = 0.0) -> Registration:
        with self._lock:
            if node_id not in self._nodes:
                raise UnknownNode(node_id)
            known = self._services.get(service.service_id)
            if known is not None and known != service:
                raise DuplicateRegistration(
                    f"service_id {service.service_id!r} already bound to a different descriptor"
                )
            for reg in self._live.values():
                if reg.service_id == service.service_id and reg.node_id == node_id:
                    raise DuplicateRegistration(
                        f"{service.service_id!r} is already registered on {node_id!r}"
                    )
            if self.enforce_placement:
                self._check_placement(service, node_id)
            reg = Registration(f"reg-{self._next_id:06d}", service.service_id, node_id, at)
            self._next_id += 1
            if known is None or (service.endpoint is not None and known.endpoint is None):
                self._services[service.service_id] = service
            self._live[reg.registration_id] = reg
            return reg

    def _check_placement(self, service: ServiceDescriptor, node_id: str) -> None:
        from fograph.placement import PlacementPolicy, eligible_nodes

        if self.topology is None:
            raise FogError("placement enforcement needs a topology")
        try:
            allowed = eligible_nodes(service, self.topology, self.policy or PlacementPolicy())
        except NoEligibleNode as exc:
            raise ConstraintViolation(str(exc)) from None
        if node_id not in allowed:
            raise ConstraintViolation(
                f"{service.name!r} ({service.granularity.value}/{service.security.value}) "
                f"may not be placed on {node_id!r}"
            )

    def unregister(self, registration_id: str) -> Registration:
        with self._lock:
            try:
                return self._live.pop(registration_id)
            except KeyError:
                raise UnknownRegistration(registration_id) from None

    # -- queries ------------------------------------------------------------

    def live_registrations(self, name: str | None = None) -> list[Registration]:
        with self._lock:
            regs = list(self._live.values())
            if name is not None:
                regs = [r for r in regs if self._services[r.service_id].name == name]
            return sorted(regs, key=lambda r: r.registration_id)

    def _pi_table(self, pi_table: Mapping[str, Any] | None) -> Mapping[str, Any]:
        if pi_table is not None:
            return pi_table
        if self.pi_source is None:
            return {}
        if hasattr(self.pi_source, "pi_table"):
            return self.pi_source.pi_table()
        return self.pi_source

    def lookup_unicast(
        self,
        name: str,
        client_node_id: str | None = None,
        pi_table: Mapping[str, Any] | None = None,
    ) -> Registration:
        """Return the single registration of ``name`` on the lowest-PI host.

        Raises ``NotFound`` when nothing live carries that name and
        ``NoMeasurements`` when every candidate host is unmeasured.
        """
        from fograph.placement import PlacementPolicy, select_registration

        policy = dataclasses.replace(self.policy or PlacementPolicy(), strict_measured=True)
        return select_registration(
            client_node_id, name, self, self._pi_table(pi_table), self.topology, policy
        )

    def lookup_multicast(self, name_pattern: str, pi_table: Mapping[str, Any] | None = None) -> list[Registration]:
        from fograph.placement import pi_value

        table = self._pi_table(pi_table)
        with self._lock:
            hits = [
                r for r in self._live.values()
                if fnmatch.fnmatchcase(self._services[r.service_id].name, name_pattern)
            ]

        def key(r: Registration) -> tuple:
            pi = pi_value(table, r.node_id)
            return (pi is None, pi if pi is not None else 0, r.node_id, r.registration_id)

        return sorted(hits, key=key)

    def invoke(self, registration: Registration, payload: bytes) -> bytes:
        """Call an invocable service through its new-style request interface."""
        from fograph.legacy import ServiceRequest

        with self._lock:
            if self._live.get(registration.registration_id) != registration:
                raise UnknownRegistration(registration.registration_id)
        service = self.service(registration.service_id)
        if service.endpoint is None:
            raise FogError(f"service {service.service_id!r} has no in-process endpoint")
        return service.endpoint(ServiceRequest(service.service_id, payload)).payload

    # -- persistence --------------------------------------------------------

    def dump(self) -> dict[str, Any]:
        with self._lock:
            return {
                "nodes": [n.to_dict() for n in self.nodes],
                "services": [self._services[k].to_dict() for k in sorted(self._services)],
                "registrations": [r.to_dict() for r in self.live_registrations()],
            }

    def dumps(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, indent=2)

    @classmethod
    def load(cls, data: Mapping[str, Any], **kwargs: Any) -> Registry:
        reg = cls(**kwargs)
        for nd in data.get("nodes", []):
            reg.add_node(NodeDescriptor.from_dict(nd))
        services = {s["service_id"]: ServiceDescriptor.from_dict(s) for s in data.get("services", [])}
        with reg._lock:
            reg._services.update(services)
            max_id = 0
            for rd in data.get("registrations", []):
                r = Registration(**rd)
                if r.node_id not in reg._nodes:
                    raise UnknownNode(r.node_id)
                if r.service_id not in reg._services:
                    raise NotFound(f"registration {r.registration_id} names unknown service {r.service_id!r}")
                reg._live[r.registration_id] = r
                suffix = r.registration_id.rsplit("-", 1)[-1]
                if suffix.isdigit():
                    max_id = max(max_id, int(suffix))
            reg._next_id = max_id + 1
        return reg

    @classmethod
    def loads(cls, text: str, **kwargs: Any) -> Registry:
        return cls.load(json.loads(text), **kwargs)


def register_all(registry: Registry, service: ServiceDescriptor, node_ids: Iterable[str], at: float = 0.0) -> list[Registration]:
    return [registry.register(service, n, at=at) for n in node_ids]
