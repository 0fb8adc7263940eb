"""Network graph of fog hosts, cloud hosts and premises access routers.

Vertices are host nodes plus access routers. Every vertex belongs to a
domain: a fog node or router to its premises, a cloud node to the WAN
(``None``). A link whose endpoints sit in different domains is a boundary
link; traversing one is what counts as crossing an access router.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from fograph.errors import DisconnectedGraph, SchemaError, Unreachable, UnknownNode
from fograph.registry import LinkKind, NodeDescriptor

DEFAULT_JITTER_MS = {LinkKind.WIRED: 0.2, LinkKind.WIRELESS: 1.0}


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    base_latency_ms: float
    jitter_ms: float = 0.0
    kind: LinkKind = LinkKind.WIRED

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LinkKind(self.kind))
        if not self.base_latency_ms > 0:
            raise ValueError(f"link {self.a}-{self.b}: base_latency_ms must be positive")
        if self.jitter_ms < 0:
            raise ValueError(f"link {self.a}-{self.b}: jitter_ms must be non-negative")

    @property
    def key(self) -> tuple[str, str]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "base_latency_ms": self.base_latency_ms,
            "jitter_ms": self.jitter_ms,
            "kind": self.kind.value,
        }


@dataclass(frozen=True)
class AccessRouter:
    router_id: str
    premises_id: str


class Topology:
    def __init__(
        self,
        nodes: Iterable[NodeDescriptor],
        links: Iterable[Link] = (),
        access_routers: Iterable[AccessRouter] = (),
    ) -> None:
        self.nodes = sorted(nodes, key=lambda n: n.node_id)
        self.links = sorted(links, key=lambda l: l.key)
        self.access_routers = sorted(access_routers, key=lambda r: r.router_id)
        self._nodes = {n.node_id: n for n in self.nodes}
        self._routers = {r.router_id: r for r in self.access_routers}
        self._by_premises = {r.premises_id: r for r in self.access_routers}
        self._adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        self._links: dict[tuple[str, str], Link] = {}
        for link in self.links:
            self._adj[link.a].add(link.b)
            self._adj[link.b].add(link.a)
            self._links[link.key] = link
        self._dist_cache: dict[str, dict[str, int]] = {}

    # -- lookup -------------------------------------------------------------

    @property
    def vertices(self) -> list[str]:
        return sorted([*self._nodes, *self._routers])

    @property
    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]

    def node(self, node_id: str) -> NodeDescriptor:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def is_router(self, vertex: str) -> bool:
        return vertex in self._routers

    def router_for(self, premises_id: str) -> AccessRouter:
        try:
            return self._by_premises[premises_id]
        except KeyError:
            raise UnknownNode(f"access router of premises {premises_id}") from None

    def domain(self, vertex: str) -> str | None:
        if vertex in self._routers:
            return self._routers[vertex].premises_id
        return self.node(vertex).premises_id

    def neighbors(self, vertex: str) -> list[str]:
        if vertex not in self._adj:
            raise UnknownNode(vertex)
        return sorted(self._adj[vertex])

    def link(self, a: str, b: str) -> Link:
        return self._links[(a, b) if a <= b else (b, a)]

    def is_boundary(self, link: Link) -> bool:
        return self.domain(link.a) != self.domain(link.b)

    def edges(self) -> list[tuple[str, str]]:
        return [l.key for l in self.links]

    # -- graph walks --------------------------------------------------------

    def hops_from(self, source: str) -> dict[str, int]:
        """BFS hop counts from ``source`` to every reachable vertex."""
        if source not in self._adj:
            raise UnknownNode(source)
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for w in self._adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        self._dist_cache[source] = dist
        return dist

    def hop_distance(self, a: str, b: str) -> int:
        dist = self.hops_from(a)
        if b not in dist:
            if b not in self._adj:
                raise UnknownNode(b)
            raise Unreachable(f"{b!r} is unreachable from {a!r}")
        return dist[b]

    def shortest_path(self, a: str, b: str) -> list[str]:
        """Fewest-hop path from ``a`` to ``b``; ties go to the lexicographically smallest path.

        Returns ``[]`` when ``a == b``.
        """
        if a not in self._adj:
            raise UnknownNode(a)
        if a == b:
            return []
        to_b = self.hops_from(b)
        if a not in to_b:
            raise Unreachable(f"{b!r} is unreachable from {a!r}")
        path = [a]
        cur = a
        while cur != b:
            cur = min(w for w in self._adj[cur] if to_b.get(w) == to_b[cur] - 1)
            path.append(cur)
        return path

    def path_links(self, path: list[str]) -> list[Link]:
        return [self.link(u, v) for u, v in zip(path, path[1:])]

    def router_crossings(self, path: list[str]) -> int:
        return sum(1 for l in self.path_links(path) if self.is_boundary(l))

    def premises_hops(self, from_premises: str, to_premises: str) -> int:
        """Hop count between the access routers of two premises."""
        if from_premises == to_premises:
            return 0
        return self.hop_distance(self.router_for(from_premises).router_id, self.router_for(to_premises).router_id)

    def is_connected(self) -> bool:
        verts = self.vertices
        return not verts or len(self.hops_from(verts[0])) == len(verts)

    # -- (de)serialization --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [n.to_dict() for n in self.nodes],
            "links": [l.to_dict() for l in self.links],
            "access_routers": [{"router_id": r.router_id, "premises_id": r.premises_id} for r in self.access_routers],
        }

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Topology:
        """Build and validate a topology from the ``nodes``/``links``/``access_routers`` keys.

        Raises:
            SchemaError: duplicate ids, dangling link endpoints, premises
                without exactly one router, or links leaving a premises
                other than through its router.
            DisconnectedGraph: the vertex graph is not connected.
        """
        problems: list[str] = []
        nodes: list[NodeDescriptor] = []
        seen: set[str] = set()
        for i, nd in enumerate(config.get("nodes", [])):
            try:
                node = NodeDescriptor.from_dict(nd)
            except (KeyError, ValueError, TypeError) as exc:
                problems.append(f"nodes[{i}]: {_msg(exc)}")
                continue
            if node.node_id in seen:
                problems.append(f"nodes[{i}].node_id: duplicate id {node.node_id!r}")
            seen.add(node.node_id)
            nodes.append(node)

        routers: list[AccessRouter] = []
        premises_routers: dict[str, list[str]] = {}
        for i, rd in enumerate(config.get("access_routers", [])):
            try:
                r = AccessRouter(rd["router_id"], rd["premises_id"])
            except (KeyError, TypeError) as exc:
                problems.append(f"access_routers[{i}]: {_msg(exc)}")
                continue
            if r.router_id in seen:
                problems.append(f"access_routers[{i}].router_id: duplicate id {r.router_id!r}")
            seen.add(r.router_id)
            routers.append(r)
            premises_routers.setdefault(r.premises_id, []).append(r.router_id)

        for node in nodes:
            if node.is_fog:
                count = len(premises_routers.get(node.premises_id, []))
                if count != 1:
                    problems.append(
                        f"access_routers: premises {node.premises_id!r} of {node.node_id!r} "
                        f"has {count} access routers, expected exactly 1"
                    )

        domain = {n.node_id: n.premises_id for n in nodes}
        domain.update({r.router_id: r.premises_id for r in routers})
        router_ids = {r.router_id for r in routers}
        links: list[Link] = []
        seen_links: set[tuple[str, str]] = set()
        for i, ld in enumerate(config.get("links", [])):
            try:
                kind = LinkKind(ld.get("kind", "wired"))
                link = Link(
                    ld["a"], ld["b"], ld["base_latency_ms"],
                    ld.get("jitter_ms", DEFAULT_JITTER_MS[kind]), kind,
                )
            except (KeyError, ValueError, TypeError) as exc:
                problems.append(f"links[{i}]: {_msg(exc)}")
                continue
            dangling = [e for e in (link.a, link.b) if e not in domain]
            if dangling:
                problems.append(f"links[{i}]: endpoint {dangling[0]!r} is not a node or access router")
                continue
            if link.a == link.b:
                problems.append(f"links[{i}]: self-loop on {link.a!r}")
                continue
            if link.key in seen_links:
                problems.append(f"links[{i}]: duplicate link {link.a}-{link.b}")
                continue
            if domain[link.a] != domain[link.b]:
                for end in (link.a, link.b):
                    if domain[end] is not None and end not in router_ids:
                        problems.append(
                            f"links[{i}]: {end!r} leaves premises {domain[end]!r} without its access router"
                        )
            seen_links.add(link.key)
            links.append(link)

        if problems:
            raise SchemaError(problems[0], problems)
        topo = cls(nodes, links, routers)
        if not topo.is_connected():
            reach = topo.hops_from(topo.vertices[0])
            missing = [v for v in topo.vertices if v not in reach]
            raise DisconnectedGraph(f"graph is disconnected; unreachable from {topo.vertices[0]!r}: {missing}")
        return topo


def _msg(exc: Exception) -> str:
    if isinstance(exc, KeyError):
        return f"missing key {exc.args[0]!r}"
    return str(exc)
