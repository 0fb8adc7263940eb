from __future__ import annotations

import copy
import random

import networkx as nx
import pytest

from fograph.config import default_config, scenario_from_config
from fograph.registry import Granularity, NodeDescriptor, Plane, Role, Security, ServiceDescriptor
from fograph.topology import Topology

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")


@pytest.fixture
def default_cfg():
    return copy.deepcopy(default_config())


@pytest.fixture
def default_scenario(default_cfg):
    return scenario_from_config(default_cfg)


def lab_topology(extra_premises: bool = False) -> Topology:
    """Small premises + cloud layout; optionally a second premises one router-hop away."""
    cfg = {
        "nodes": [
            {"node_id": "client", "plane": "fog", "premises_id": "home", "role": "cluster_frontend"},
            {"node_id": "f1", "plane": "fog", "premises_id": "home", "role": "master"},
            {"node_id": "c1", "plane": "cloud", "role": "cloud_dc", "cpu_capacity": 1000},
        ],
        "access_routers": [{"router_id": "ar-home", "premises_id": "home"}],
        "links": [
            {"a": "client", "b": "ar-home", "base_latency_ms": 1, "jitter_ms": 0},
            {"a": "f1", "b": "ar-home", "base_latency_ms": 1, "jitter_ms": 0},
            {"a": "ar-home", "b": "c1", "base_latency_ms": 40, "jitter_ms": 0},
        ],
    }
    if extra_premises:
        cfg["nodes"] += [
            {"node_id": "n1", "plane": "fog", "premises_id": "near", "role": "master"},
            {"node_id": "n2", "plane": "fog", "premises_id": "near", "role": "slave"},
            {"node_id": "x1", "plane": "fog", "premises_id": "far", "role": "master"},
        ]
        cfg["access_routers"] += [
            {"router_id": "ar-near", "premises_id": "near"},
            {"router_id": "ar-far", "premises_id": "far"},
        ]
        cfg["links"] += [
            {"a": "ar-home", "b": "ar-near", "base_latency_ms": 5, "jitter_ms": 0},
            {"a": "n1", "b": "ar-near", "base_latency_ms": 1, "jitter_ms": 0},
            {"a": "n2", "b": "n1", "base_latency_ms": 1, "jitter_ms": 0},
            {"a": "ar-near", "b": "ar-far", "base_latency_ms": 5, "jitter_ms": 0},
            {"a": "x1", "b": "ar-far", "base_latency_ms": 1, "jitter_ms": 0},
        ]
    return Topology.from_config(cfg)


def random_topology_config(rng: random.Random, max_nodes: int = 12, jitter: bool = True) -> dict:
    """Random connected config: 1-3 premises each behind one router, plus cloud nodes."""
    n_premises = rng.randint(1, 3)
    n_nodes = rng.randint(2, max_nodes)
    n_cloud = rng.randint(0, max(0, n_nodes // 3))
    routers = [f"ar-{p}" for p in range(n_premises)]
    nodes, links = [], []

    def link(a, b):
        links.append({
            "a": a, "b": b,
            "base_latency_ms": rng.choice([1, 2, 3, 5, 8, 20, 50]),
            "jitter_ms": rng.choice([0, 0.5, 2.0]) if jitter else 0,
            "kind": rng.choice(["wired", "wireless"]),
        })

    for i in range(1, len(routers)):
        link(routers[i], routers[rng.randrange(i)])
    members: dict[int, list[str]] = {p: [] for p in range(n_premises)}
    for i in range(n_nodes - n_cloud):
        p = rng.randrange(n_premises)
        nid = f"f{i:02d}"
        nodes.append({
            "node_id": nid, "plane": "fog", "premises_id": f"p{p}",
            "role": rng.choice(["master", "slave", "cluster_frontend"]),
            "cpu_capacity": rng.choice([50, 100, 200, 400]),
        })
        link(nid, rng.choice([routers[p], *members[p]]))
        members[p].append(nid)
    clouds: list[str] = []
    for i in range(n_cloud):
        cid = f"c{i:02d}"
        nodes.append({"node_id": cid, "plane": "cloud", "role": "cloud_dc", "cpu_capacity": rng.choice([1000, 4000])})
        link(cid, rng.choice(routers + clouds))
        clouds.append(cid)
    return {
        "nodes": nodes,
        "links": links,
        "access_routers": [{"router_id": r, "premises_id": f"p{i}"} for i, r in enumerate(routers)],
    }


def random_service(rng: random.Random, sid: str = "svc", name: str = "svc") -> ServiceDescriptor:
    return ServiceDescriptor(
        sid, name, rng.choice(list(Granularity)), rng.choice(list(Security)),
    )


def to_nx(topo: Topology) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(topo.vertices)
    g.add_edges_from(topo.edges())
    return g


def oracle_eligible(service, topo: Topology, policy, client=None, among=None) -> set[str]:
    """Eligibility rules restated directly over networkx hop counts."""
    g = to_nx(topo)
    ok = set()
    premises = topo.node(client).premises_id if client else None
    nodes = {n.node_id: n for n in topo.nodes if among is None or n.node_id in among}
    local_fog = {nid for nid, n in nodes.items() if n.plane is Plane.FOG and premises and n.premises_id == premises}
    router_of = {r.premises_id: r.router_id for r in topo.access_routers}
    for nid, n in nodes.items():
        if service.security is Security.CONFIDENTIAL and policy.confidential_fog_only and n.plane is Plane.CLOUD:
            continue
        if service.granularity is Granularity.MEGA and policy.mega_prefers_premises:
            if n.plane is Plane.CLOUD:
                continue
            if premises is not None:
                if local_fog:
                    if n.premises_id != premises:
                        continue
                else:
                    d = nx.shortest_path_length(g, router_of[premises], router_of[n.premises_id])
                    if d > policy.max_mega_hops_from_premises:
                        continue
        ok.add(nid)
    return ok


def fog_node(node_id: str, premises: str = "lab", **kw) -> NodeDescriptor:
    return NodeDescriptor(node_id, Plane.FOG, premises_id=premises, role=kw.pop("role", Role.SLAVE), **kw)


def cloud_node(node_id: str, **kw) -> NodeDescriptor:
    return NodeDescriptor(node_id, Plane.CLOUD, role=Role.CLOUD_DC, **kw)
