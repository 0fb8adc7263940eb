"""Deterministic discrete-event simulation of a fog/cloud deployment.

Time is kept in integer microseconds. Periodic sources (probe rounds,
workload streams, sensor polls) first fire one interval after t=0, and
events at the same instant run probe < request < sensor, then by source id.
Each stochastic draw comes from a substream keyed by what it belongs to
(``("request", request_id)``, ``("probe", round)``, ``("sensor", id)``), so a
run is fully reproducible from its seed.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from fograph import legacy
from fograph.config import DEFAULT_WORK, Scenario
from fograph.errors import FogError, NoEligibleNode, NoMeasurements, NotFound, Unreachable, UnknownNode
from fograph.metrics import MetricsStore, PriorityMap, RtSample, Source
from fograph.placement import (
    PlacementDecision,
    Reason,
    candidate_registrations,
    eligible_nodes,
    pi_value,
    provider_place,
    redirect_registration,
    select_registration,
)
from fograph.registry import Granularity, NodeDescriptor, Registration, Registry, Role, ServiceDescriptor
from fograph.rng import RngFactory
from fograph.sensors import SensorReading, SensorStore, read_sensor
from fograph.topology import Topology

log = logging.getLogger(__name__)

US_PER_S = 1_000_000
KIND_RANK = {"topology": -2, "registration": -1, "probe": 0, "request": 1, "sensor_poll": 2}
LEGACY_HANDLERS = {
    "calculating": legacy.CALCULATING_SERVICE,
    "editor": legacy.EDITOR_SERVICE,
    "echo": legacy.LegacyService("legacy-echo-service", legacy.echo_handler),
}


def to_us(seconds: float) -> int:
    return round(seconds * US_PER_S)


def build_topology(config: Mapping[str, Any] | None = None) -> Topology:
    """Materialize a topology; ``None`` gives the bundled two-master/four-slave lab."""
    if config is None:
        from fograph.config import default_config

        config = default_config()
    return Topology.from_config(config)


# -- request level -------------------------------------------------------------

def path_latency(topology: Topology, a: str, b: str, rng: np.random.Generator) -> tuple[list[str], float]:
    """Hop-shortest path and its latency: per link, base + U(0, jitter).

    One uniform draw is consumed per traversed link, in path order.
    """
    path = topology.shortest_path(a, b)
    rt = 0.0
    for link in topology.path_links(path):
        rt += link.base_latency_ms + float(rng.random()) * link.jitter_ms
    return path, rt


def processing_ms(service: ServiceDescriptor, host: NodeDescriptor, work: Mapping[Granularity, float] | None = None) -> float:
    units = (work or DEFAULT_WORK)[service.granularity]
    return units / host.cpu_capacity * 1000.0


@dataclass(frozen=True)
class RequestTrace:
    request_id: str
    client_node_id: str
    host_node_id: str
    service_id: str
    path: list[str]
    rt_ms: float
    router_crossings: int
    bytes_over_wan: int
    at: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "client_node_id": self.client_node_id,
            "host_node_id": self.host_node_id,
            "service_id": self.service_id,
            "path": list(self.path),
            "rt_ms": self.rt_ms,
            "router_crossings": self.router_crossings,
            "bytes_over_wan": self.bytes_over_wan,
        }


def simulate_request(
    topology: Topology,
    client: str,
    host: str,
    service: ServiceDescriptor,
    rng: np.random.Generator,
    *,
    work: Mapping[Granularity, float] | None = None,
    request_id: str = "req",
    at: float = 0.0,
    event_log: EventLog | None = None,
    metrics: MetricsStore | None = None,
) -> RequestTrace:
    """One client->host request: network latency plus host processing time.

    The response payload counts against the WAN only when the path crosses
    at least one boundary link.
    """
    path, net = path_latency(topology, client, host, rng)
    crossings = topology.router_crossings(path)
    trace = RequestTrace(
        request_id=request_id,
        client_node_id=client,
        host_node_id=host,
        service_id=service.service_id,
        path=path,
        rt_ms=net + processing_ms(service, topology.node(host), work),
        router_crossings=crossings,
        bytes_over_wan=service.payload_bytes if crossings else 0,
        at=at,
    )
    if event_log is not None:
        event_log.append(to_us(at), "request", service_name=service.name, **trace.to_dict())
    if metrics is not None:
        metrics.record_sample(RtSample(host, trace.rt_ms, at, Source.REQUEST))
    return trace


def probe_round(
    topology: Topology,
    prober: str,
    targets: Iterable[str],
    rng: np.random.Generator,
    *,
    at: float = 0.0,
    probe_work: float = DEFAULT_WORK[Granularity.MINI],
) -> list[RtSample]:
    """Probe each target once from ``prober``.

    A probe costs the path latency plus ``probe_work`` units on the target.
    Unknown or unreachable targets are logged and skipped.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("probe_round needs at least one target")
    samples = []
    for target in sorted(targets):
        try:
            _, net = path_latency(topology, prober, target, rng)
            node = topology.node(target)
        except (Unreachable, UnknownNode) as exc:
            log.warning("probe from %s to %s skipped: %s", prober, target, exc)
            continue
        samples.append(RtSample(target, net + probe_work / node.cpu_capacity * 1000.0, at, Source.PROBE))
    return samples


# -- event log -----------------------------------------------------------------

class EventLog:
    """Time-ordered list of simulation events, serialized as NDJSON."""

    def __init__(self) -> None:
        self.events: list[dict[str, Any]] = []

    def append(self, t_us: int, kind: str, **fields: Any) -> None:
        if self.events and t_us < self.events[-1]["t_us"]:
            raise ValueError(f"event at {t_us} us precedes the last logged event")
        self.events.append({"t_us": t_us, "kind": kind, **fields})

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["kind"] == kind]

    def to_ndjson(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)

    @classmethod
    def from_ndjson(cls, text: str) -> EventLog:
        out = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: {exc.msg}") from None
            out.events.append(event)
        return out


# -- scenario level ------------------------------------------------------------

@dataclass
class ScenarioReport:
    seed: int
    duration_s: float
    probe_interval_s: float
    probe_rounds: int
    samples: int
    requests: int
    failed_requests: int
    router_crossings_total: int
    bytes_over_wan_total: int
    mean_rt: list[dict[str, Any]]
    priority_map: PriorityMap
    decisions: list[PlacementDecision]
    sensor_readings: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "duration_s": self.duration_s,
            "probe_interval_s": self.probe_interval_s,
            "probe_rounds": self.probe_rounds,
            "samples": self.samples,
            "requests": self.requests,
            "failed_requests": self.failed_requests,
            "router_crossings_total": self.router_crossings_total,
            "bytes_over_wan_total": self.bytes_over_wan_total,
            "mean_rt": self.mean_rt,
            "priority_map": self.priority_map.to_dict(),
            "decisions": [d.to_dict() for d in self.decisions],
            "sensor_readings": dict(self.sensor_readings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def default_prober(topology: Topology) -> str:
    for node in topology.nodes:
        if node.role is Role.CLUSTER_FRONTEND:
            return node.node_id
    fog = [n.node_id for n in topology.nodes if n.is_fog]
    return (fog or topology.node_ids)[0]


class Simulation:
    """One run of a :class:`Scenario`; keeps its stores around for inspection."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        topo = scenario.topology
        self.topology = topo
        self.rng = RngFactory(scenario.seed)
        self.metrics = MetricsStore(topo.node_ids, pi_window=scenario.pi_window, policy=scenario.band_policy)
        self.registry = Registry(topo, scenario.placement_policy, pi_source=self.metrics)
        self.sensors = SensorStore(scenario.sensors)
        self.log = EventLog()
        self.traces: list[RequestTrace] = []
        self.probe_rounds = 0
        self.probes_issued = 0
        self.failed_requests = 0
        self.prober = scenario.prober or default_prober(topo)
        if scenario.probe_targets is not None:
            self.probe_targets = sorted(scenario.probe_targets)
        else:
            self.probe_targets = [n for n in topo.node_ids if n != self.prober]
        self._sensor_streams = {s.sensor_id: self.rng.stream("sensor", s.sensor_id) for s in scenario.sensors}
        self._last_reading: dict[str, SensorReading] = {}
        self._request_seq = 0

    # setup

    def _setup(self) -> None:
        topo = self.topology
        self.log.append(
            0, "topology",
            nodes=topo.node_ids,
            routers=[r.router_id for r in topo.access_routers],
            edges=[list(e) for e in topo.edges()],
        )
        policy = self.scenario.placement_policy
        for cfg in self.scenario.services:
            desc = cfg.descriptor
            if cfg.legacy is not None:
                desc = legacy.wrap_legacy(LEGACY_HANDLERS[cfg.legacy], desc)
            hosts = cfg.hosts if cfg.hosts is not None else eligible_nodes(desc, topo, policy)
            for host in hosts:
                reg = self.registry.register(desc, host, at=0.0)
                self.log.append(
                    0, "registration",
                    registration_id=reg.registration_id,
                    service_id=desc.service_id,
                    service_name=desc.name,
                    node_id=host,
                    granularity=desc.granularity.value,
                    security=desc.security.value,
                    migration_state=desc.migration_state.value,
                )

    # event handlers

    def _probe(self, t_us: int) -> None:
        self.probe_rounds += 1
        at = t_us / US_PER_S
        rng = self.rng.stream("probe", self.probe_rounds)
        if not self.probe_targets:
            return
        for sample in probe_round(self.topology, self.prober, self.probe_targets, rng, at=at,
                                  probe_work=self.scenario.granularity_work[Granularity.MINI]):
            self.metrics.record_sample(sample)
            self.probes_issued += 1
            self.log.append(t_us, "probe", round=self.probe_rounds, prober=self.prober,
                            node_id=sample.node_id, rt_ms=sample.rt_ms)

    def _choose(self, client: str, service_name: str, routing: str) -> Registration:
        table = self.metrics.pi_table()
        policy = self.scenario.placement_policy
        if routing == "redirect":
            return redirect_registration(client, service_name, self.registry, self.topology, table, policy)
        return select_registration(client, service_name, self.registry, table, self.topology, policy)

    def _request(self, t_us: int, index: int) -> None:
        w = self.scenario.workload[index]
        self._request_seq += 1
        request_id = f"req-{self._request_seq:06d}"
        try:
            reg = self._choose(w.client, w.service_name, w.routing)
        except (NotFound, NoMeasurements) as exc:
            self.failed_requests += 1
            self.log.append(t_us, "request_failed", request_id=request_id, client_node_id=w.client,
                            service_name=w.service_name, error=type(exc).__name__)
            return
        service = self.registry.service(reg.service_id)
        trace = simulate_request(
            self.topology, w.client, reg.node_id, service, self.rng.stream("request", request_id),
            work=self.scenario.granularity_work, request_id=request_id, at=t_us / US_PER_S,
            event_log=self.log, metrics=self.metrics,
        )
        self.traces.append(trace)

    def _sensor(self, t_us: int, sensor_id: str) -> None:
        spec = self.sensors.spec(sensor_id)
        reading = read_sensor(spec, t_us / US_PER_S, self._sensor_streams[sensor_id],
                              self._last_reading.get(sensor_id))
        self.sensors.store_reading(reading)
        self._last_reading[sensor_id] = reading
        self.log.append(t_us, "sensor_poll", sensor_id=sensor_id, host_node_id=spec.host_node_id,
                        temperature_c=reading.temperature_c, humidity_pct=reading.humidity_pct)

    # main loop

    def _sources(self) -> list[tuple[int, int, str, Any]]:
        """(interval_us, kind rank, source id, handler arg) for every periodic source."""
        sc = self.scenario
        sources = [(to_us(sc.probe_interval_s), KIND_RANK["probe"], "probe", None)]
        for i, w in enumerate(sc.workload):
            if w.rate > 0:
                sources.append((max(1, round(US_PER_S / w.rate)), KIND_RANK["request"], f"w{i:06d}", i))
        for spec in sc.sensors:
            sources.append((to_us(spec.interval_s), KIND_RANK["sensor_poll"], spec.sensor_id, spec.sensor_id))
        return sources

    def run(self) -> tuple[EventLog, ScenarioReport]:
        self._setup()
        end_us = to_us(self.scenario.duration_s)
        queue: list[tuple[int, int, str, int, Any]] = []
        for interval, rank, sid, arg in self._sources():
            if interval <= end_us:
                heapq.heappush(queue, (interval, rank, sid, interval, arg))
        while queue:
            t_us, rank, sid, interval, arg = heapq.heappop(queue)
            if rank == KIND_RANK["probe"]:
                self._probe(t_us)
            elif rank == KIND_RANK["request"]:
                self._request(t_us, arg)
            else:
                self._sensor(t_us, arg)
            if t_us + interval <= end_us:
                heapq.heappush(queue, (t_us + interval, rank, sid, interval, arg))
        return self.log, self._report()

    # reporting

    def _decisions(self) -> list[PlacementDecision]:
        table = self.metrics.pi_table()
        policy = self.scenario.placement_policy
        out = []
        for cfg in self.scenario.services:
            try:
                out.append(provider_place(cfg.descriptor, self.topology, table, policy))
            except (NoEligibleNode, NoMeasurements) as exc:
                log.info("no provider decision for %s: %s", cfg.descriptor.service_id, exc)
        for w in self.scenario.workload:
            try:
                reg = self._choose(w.client, w.service_name, w.routing)
                cands = candidate_registrations(w.client, w.service_name, self.registry, self.topology, policy)
            except (NotFound, NoMeasurements):
                continue
            eligible = sorted({r.node_id for r, _ in cands})
            if w.routing == "redirect":
                reason = Reason.NEAREST_PREMISES
            elif len(eligible) == 1:
                reason = Reason.ONLY_ELIGIBLE
            elif pi_value(table, reg.node_id) is None:
                reason = Reason.UNMEASURED_FALLBACK
            else:
                reason = Reason.LOWEST_PI
            out.append(PlacementDecision(reg.service_id, reg.node_id, eligible, reason, w.client, "client"))
        return out

    def _report(self) -> ScenarioReport:
        groups: dict[tuple[str, str], list[float]] = defaultdict(list)
        for tr in self.traces:
            groups[(tr.client_node_id, self.registry.service(tr.service_id).name)].append(tr.rt_ms)
        mean_rt = [
            {"client_node_id": c, "service_name": s, "count": len(v), "mean_rt_ms": math.fsum(v) / len(v)}
            for (c, s), v in sorted(groups.items())
        ]
        sc = self.scenario
        pmap = self.metrics.priority_map(policy=sc.band_policy, generated_at=float(sc.duration_s))
        return ScenarioReport(
            seed=sc.seed,
            duration_s=float(sc.duration_s),
            probe_interval_s=float(sc.probe_interval_s),
            probe_rounds=self.probe_rounds,
            samples=len(self.metrics),
            requests=len(self.traces),
            failed_requests=self.failed_requests,
            router_crossings_total=sum(t.router_crossings for t in self.traces),
            bytes_over_wan_total=sum(t.bytes_over_wan for t in self.traces),
            mean_rt=mean_rt,
            priority_map=pmap,
            decisions=self._decisions(),
            sensor_readings={s: len(self.sensors.series(s)) for s in self.sensors.sensor_ids},
        )

    def dot(self, pmap: PriorityMap | None = None) -> str:
        pmap = pmap or self.metrics.priority_map(policy=self.scenario.band_policy,
                                                 generated_at=float(self.scenario.duration_s))
        return pmap.to_dot(self.topology.edges(), [r.router_id for r in self.topology.access_routers])


def run_scenario(scenario: Scenario) -> tuple[EventLog, ScenarioReport]:
    return Simulation(scenario).run()


def metrics_from_log(event_log: EventLog) -> tuple[MetricsStore, dict[str, Any] | None]:
    """Rebuild the sample store (and topology summary, if logged) from an event log."""
    topo_event = next((e for e in event_log if e["kind"] == "topology"), None)
    store = MetricsStore(topo_event["nodes"] if topo_event else ())
    for e in event_log:
        if e["kind"] == "probe":
            node, source = e["node_id"], Source.PROBE
        elif e["kind"] == "request":
            node, source = e["host_node_id"], Source.REQUEST
        else:
            continue
        store.add_node(node)
        try:
            store.record_sample(RtSample(node, e["rt_ms"], e["t_us"] / US_PER_S, source))
        except FogError as exc:
            raise ValueError(f"bad sample event {e}: {exc}") from None
    return store, topo_event
