"""Acceptance criteria 1-10, each checked against an independent oracle.

Every test records its outcome in ``ACCEPTANCE_RESULTS``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import copy
import math
import random
from fractions import Fraction

import networkx as nx
import numpy as np

from fograph.cli import main
from fograph.config import default_config, scenario_from_config
from fograph.errors import NoEligibleNode
from fograph.legacy import CALCULATING_SERVICE, ServiceRequest, encode_calc, wrap_legacy
from fograph.metrics import AbsolutePolicy, MetricsStore, PiRecord, QuantilePolicy, RtSample, classify
from fograph.netsim import Simulation, build_topology
from fograph.placement import PlacementPolicy, eligible_nodes, provider_place, select_host
from fograph.registry import Granularity, Plane, Registry, Role, Security, ServiceDescriptor
from fograph.sensors import parse_csv
from fograph.topology import Topology

from conftest import ACCEPTANCE_RESULTS, oracle_eligible, random_service, random_topology_config, to_nx


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[n] = (ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


def random_cluster(rng):
    ids = [f"n{i}" for i in range(rng.randint(1, 12))]
    return {n: [rng.uniform(0, 500) for _ in range(rng.randint(0, 50))] for n in ids}


# 1 -------------------------------------------------------------------------------

def test_c1_total_response_time_oracle():
    rng = random.Random(101)
    exact_bad = float_bad = 0
    worst = 0.0
    for _ in range(200):
        cluster = random_cluster(rng)
        exact, approx = MetricsStore(cluster, exact=True), MetricsStore(cluster)
        for n, rts in cluster.items():
            for rt in rts:
                exact.record_sample(RtSample(n, rt))
                approx.record_sample(RtSample(n, rt))
        flat = [rt for rts in cluster.values() for rt in rts]
        want_exact = sum((Fraction(x) for x in flat), Fraction(0))
        exact_bad += exact.total_response_time(cluster) != want_exact
        want = float(want_exact)
        got = approx.total_response_time(cluster)
        rel = abs(got - want) / want if want else abs(got)
        worst = max(worst, rel)
        float_bad += rel > 1e-9
    record(1, exact_bad == 0 and float_bad == 0,
           f"200 clusters: {exact_bad} exact mismatches, {float_bad} float > 1e-9 (worst rel {worst:.1e})")


# 2 -------------------------------------------------------------------------------

def test_c2_priority_index_oracle():
    rng = random.Random(202)
    bad = 0
    for _ in range(200):
        cluster = random_cluster(rng)
        store = MetricsStore(cluster)
        for n, rts in cluster.items():
            for rt in rts:
                store.record_sample(RtSample(n, rt))
        for n, rts in cluster.items():
            pi = store.priority_index(n).pi_ms
            if not rts:
                bad += pi is not None
                continue
            acc = 0.0
            for rt in rts:
                acc += rt
            bad += not math.isclose(pi, acc / len(rts), rel_tol=1e-9)
        flat = [rt for rts in cluster.values() for rt in rts]
        cpi = store.cluster_priority_index(cluster)
        if flat:
            bad += not math.isclose(cpi, sum(flat) / len(flat), rel_tol=1e-9)
        else:
            bad += cpi is not None
    record(2, bad == 0, f"per-node and cluster PI vs naive mean: {bad} mismatches")


# 3 -------------------------------------------------------------------------------

def test_c3_band_consistency():
    rng = random.Random(303)
    mono_bad = scale_bad = 0
    for _ in range(100):
        table = {
            f"n{i}": (None if rng.random() < 0.15 else rng.choice([float(rng.randint(1, 40)), rng.uniform(0, 300)]))
            for i in range(rng.randint(1, 25))
        }
        recs = [PiRecord(n, pi or 0.0, int(pi is not None), pi) for n, pi in table.items()]
        lo, hi = sorted(rng.uniform(0, 300) for _ in range(2))
        for policy in (QuantilePolicy(), AbsolutePolicy(lo, hi)):
            bands = {r.node_id: r.band for r in classify(recs, policy)}
            measured = sorted((pi, bands[n].order) for n, pi in table.items() if pi is not None)
            mono_bad += any(a[1] > b[1] for a, b in zip(measured, measured[1:]))
        base = {r.node_id: r.band for r in classify(recs, QuantilePolicy())}
        for c in (0.5, 2, 10):
            scaled = [PiRecord(r.node_id, r.total_rt_ms * c, r.sample_count, None if r.pi_ms is None else r.pi_ms * c)
                      for r in recs]
            scale_bad += {r.node_id: r.band for r in classify(scaled, QuantilePolicy())} != base
    record(3, mono_bad == 0 and scale_bad == 0,
           f"100 tables: {mono_bad} monotonicity violations, {scale_bad} scale-invariance violations")


# 4 -------------------------------------------------------------------------------

def _permuted_topology(cfg, rng):
    cfg = copy.deepcopy(cfg)
    for key in ("nodes", "links", "access_routers"):
        rng.shuffle(cfg[key])
    return Topology.from_config(cfg)


def test_c4_argmin_selection():
    rng = random.Random(404)
    policy = PlacementPolicy()
    done = bad = perm_bad = 0
    while done < 200:
        cfg = random_topology_config(rng)
        topo = Topology.from_config(cfg)
        svc = random_service(rng)
        # ties are likely with small integer PIs
        pis = {n: rng.choice([None, float(rng.randint(1, 6))]) for n in topo.node_ids}
        allowed = sorted(oracle_eligible(svc, topo, policy))
        if not allowed:
            continue
        done += 1
        measured = sorted((pis[n], n) for n in allowed if pis[n] is not None)
        decision = provider_place(svc, topo, pis, policy)
        if measured and decision.chosen_node_id != measured[0][1]:
            bad += 1

        hosts = rng.sample(allowed, rng.randint(1, len(allowed)))
        client = rng.choice(topo.node_ids)
        cands = sorted(oracle_eligible(svc, topo, policy, client, among=set(hosts)))
        reg = Registry(topo, pi_source={})
        for h in hosts:
            reg.register(svc, h)
        try:
            chosen = select_host(client, svc.name, reg, pis, topo, policy)
        except NoEligibleNode:
            bad += bool(cands)
            continue
        if not cands:
            bad += 1
            continue
        m = sorted((pis[h], h) for h in cands if pis[h] is not None)
        if m and chosen != m[0][1]:
            bad += 1

        for _ in range(3):
            ptopo = _permuted_topology(cfg, rng)
            items = list(pis.items())
            rng.shuffle(items)
            ppis = dict(items)
            order = hosts[:]
            rng.shuffle(order)
            preg = Registry(ptopo, pi_source={})
            for h in order:
                preg.register(svc, h)
            perm_bad += provider_place(svc, ptopo, ppis, policy).chosen_node_id != decision.chosen_node_id
            perm_bad += select_host(client, svc.name, preg, ppis, ptopo, policy) != chosen
    record(4, bad == 0 and perm_bad == 0,
           f"200 instances vs brute-force argmin: {bad} mismatches, {perm_bad} permutation-dependent results")


# 5 -------------------------------------------------------------------------------

def _random_scenario_config(rng):
    cfg = random_topology_config(rng)
    topo = Topology.from_config(cfg)
    policy = PlacementPolicy(max_mega_hops_from_premises=rng.randint(0, 2))
    services, workload = [], []
    for i in range(rng.randint(2, 6)):
        svc = random_service(rng, sid=f"svc-{i}", name=f"service-{i}")
        try:
            allowed = eligible_nodes(svc, topo, policy)
        except NoEligibleNode:
            continue
        entry = svc.to_dict()
        entry.pop("migration_state", None)
        if rng.random() < 0.5:
            entry["hosts"] = rng.sample(allowed, rng.randint(1, len(allowed)))
        services.append(entry)
        hosts = entry.get("hosts")
        for client in rng.sample(topo.node_ids, min(2, len(topo.node_ids))):
            try:
                eligible_nodes(svc, topo, policy, client, among=hosts)
            except NoEligibleNode:
                continue
            workload.append({"client": client, "service_name": svc.name, "rate": rng.choice([0.05, 0.1, 0.2]),
                             "routing": rng.choice(["pi", "redirect"])})
    keep = {"service_id", "name", "granularity", "security", "payload_bytes", "version", "hosts"}
    cfg.update(
        seed=rng.randrange(2**32), duration_s=120, probe_interval_s=30,
        services=[{k: v for k, v in s.items() if k in keep} for s in services],
        workload=workload,
        placement_policy={"max_mega_hops_from_premises": policy.max_mega_hops_from_premises},
    )
    return cfg


def _safety_violations(sim):
    topo, policy = sim.topology, sim.scenario.placement_policy
    g = to_nx(topo)
    out = []

    def check(event, host, client):
        node = topo.node(host)
        sec, gran = event["security"], event["granularity"]
        if sec == Security.CONFIDENTIAL.value and node.plane is Plane.CLOUD:
            out.append(f"confidential {event['service_name']} on cloud {host}")
        if gran == Granularity.MEGA.value:
            if node.plane is Plane.CLOUD:
                out.append(f"mega {event['service_name']} on cloud {host}")
            elif client is not None and topo.node(client).premises_id is not None:
                a = topo.router_for(topo.node(client).premises_id).router_id
                b = topo.router_for(node.premises_id).router_id
                if nx.shortest_path_length(g, a, b) > policy.max_mega_hops_from_premises:
                    out.append(f"mega {event['service_name']} served to {client} from {host} beyond hop bound")

    regs = {}
    for e in sim.log.of_kind("registration"):
        regs[e["service_id"]] = e
        check(e, e["node_id"], None)
    for e in sim.log.of_kind("request"):
        check(regs[e["service_id"]] | {"service_name": e["service_name"]}, e["host_node_id"], e["client_node_id"])
    return out


def test_c5_placement_safety():
    violations, runs, traces = [], 0, 0
    for seed in range(20):
        sim = Simulation(scenario_from_config(default_config(), seed=seed))
        sim.run()
        violations += _safety_violations(sim)
        runs += 1
        traces += len(sim.traces)
    rng = random.Random(505)
    while runs < 80:
        cfg = _random_scenario_config(rng)
        if not cfg["workload"]:
            continue
        sim = Simulation(scenario_from_config(cfg))
        sim.run()
        violations += _safety_violations(sim)
        runs += 1
        traces += len(sim.traces)
    record(5, not violations and traces > 0,
           f"{runs} runs, {traces} traces: {len(violations)} violations" + (f" e.g. {violations[0]}" if violations else ""))


# 6 -------------------------------------------------------------------------------

def _paired_config(host, seed):
    cfg = default_config()
    for link in cfg["links"]:
        link["base_latency_ms"] = 50 if "cloud-dc" in (link["a"], link["b"]) else 2
    cfg["seed"] = seed
    cfg["services"] = [{
        "service_id": "svc-calculating", "name": "calculating-service", "granularity": "macro",
        "security": "public", "legacy": "calculating", "hosts": [host],
    }]
    cfg["workload"] = [{"client": "ha-proxy", "service_name": "calculating-service", "rate": 0.1}]
    return cfg


def test_c6_fog_vs_cloud():
    wins, lines = 0, []
    for seed in range(10):
        reports = {}
        for host in ("tg-master-1", "cloud-dc"):
            sim = Simulation(scenario_from_config(_paired_config(host, seed)))
            _, rep = sim.run()
            reports[host] = (rep.mean_rt[0]["mean_rt_ms"], rep.router_crossings_total, rep.requests)
        (fog_rt, fog_x, n_fog), (cloud_rt, cloud_x, n_cloud) = reports["tg-master-1"], reports["cloud-dc"]
        ok = fog_rt < cloud_rt and fog_x == 0 and cloud_x >= 1 and n_fog == n_cloud > 0
        wins += ok
        lines.append(f"{fog_rt:.1f}/{cloud_rt:.1f}")
    record(6, wins == 10, f"{wins}/10 seeds fog faster with 0 crossings vs >=1 (mean ms fog/cloud: {', '.join(lines[:3])}, ...)")


# 7 -------------------------------------------------------------------------------

def test_c7_cli_determinism(tmp_path):
    def tree(root):
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    codes = [main(["simulate", "default", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    needed = {"report.json", "events.ndjson", "priority_map.dot", "priority_map.json"}
    has_all = needed <= set(a) and any(k.startswith("sensors/") for k in a)
    ok = codes == [0, 0] and has_all and a == b
    record(7, ok, f"{len(a)} files, byte-identical: {a == b}")


# 8 -------------------------------------------------------------------------------

def test_c8_sensor_pipeline():
    sim = Simulation(scenario_from_config(default_config()))
    sim.run()
    problems = []
    for sid in sim.sensors.sensor_ids:
        spec = sim.sensors.spec(sid)
        series = sim.sensors.series(sid)
        if len(series) != 5:
            problems.append(f"{sid}: {len(series)} readings")
        for r in series:
            if not (spec.temp_range_c[0] <= r.temperature_c <= spec.temp_range_c[1]
                    and spec.humidity_range_pct[0] <= r.humidity_pct <= spec.humidity_range_pct[1]):
                problems.append(f"{sid}: {r} out of range")
        back = parse_csv(sim.sensors.export_csv(sid))
        expect = [(r.sensor_id, float(f"{r.at:.3f}"), float(f"{r.temperature_c:.3f}"), float(f"{r.humidity_pct:.3f}"))
                  for r in series]
        if [(b.sensor_id, b.at, b.temperature_c, b.humidity_pct) for b in back] != expect:
            problems.append(f"{sid}: CSV round trip differs")
    ok = not problems and len(sim.sensors.sensor_ids) == 2
    record(8, ok, f"{len(sim.sensors.sensor_ids)} sensors x 5 readings, in range, CSV round trip" +
           (f": {problems}" if problems else ""))


# 9 -------------------------------------------------------------------------------

def test_c9_migration_equivalence(capsys):
    rng = np.random.default_rng(909)
    wrapped = wrap_legacy(CALCULATING_SERVICE, ServiceDescriptor("svc-calc", "calculating-service", Granularity.MACRO))
    mismatches = 0
    ops = ["add", "sub", "mul", "div"]
    for _ in range(1000):
        a = Fraction(int(rng.integers(-10**6, 10**6)), int(rng.integers(1, 100)))
        b = Fraction(int(rng.integers(-10**6, 10**6)), int(rng.integers(1, 100)))
        req = encode_calc(ops[int(rng.integers(4))], a, b)
        mismatches += wrapped.endpoint(ServiceRequest("svc-calc", req)).payload != CALCULATING_SERVICE.handler(req)
    code = main(["migrate-demo", "--cases", "50"])
    capsys.readouterr()
    record(9, mismatches == 0 and code == 0, f"1000 inputs: {mismatches} mismatches; migrate-demo exit {code}")


# 10 ------------------------------------------------------------------------------

def test_c10_topology_defaults():
    topo = build_topology()
    roles = [n.role for n in topo.nodes]
    counts = {
        "master": sum(r is Role.MASTER and topo.node(n).is_fog for r, n in zip(roles, topo.node_ids)),
        "slave": sum(r is Role.SLAVE and topo.node(n).is_fog for r, n in zip(roles, topo.node_ids)),
        "frontend": roles.count(Role.CLUSTER_FRONTEND),
        "cloud": sum(n.plane is Plane.CLOUD for n in topo.nodes),
    }
    ok = counts == {"master": 2, "slave": 4, "frontend": 1, "cloud": 1} and len(topo.nodes) == 8
    record(10, ok, f"population {counts}")
