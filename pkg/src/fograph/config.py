"""Scenario configuration: JSON schema, semantic checks, overrides and loading."""

from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema

from fograph.errors import NoEligibleNode, SchemaError
from fograph.metrics import BandPolicy, parse_band_policy
from fograph.placement import PlacementPolicy, eligible_nodes
from fograph.registry import Granularity, ServiceDescriptor
from fograph.sensors import SensorSpec
from fograph.topology import Topology

SEED_ENV = "FOGRAPH_SEED"
DEFAULT_SEED = 0
DEFAULT_WORK = {Granularity.MINI: 1.0, Granularity.MACRO: 10.0, Granularity.MEGA: 100.0}

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_range = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["nodes", "duration_s", "probe_interval_s"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "duration_s": _pos,
        "probe_interval_s": _pos,
        "prober": {"type": "string"},
        "probe_targets": {"type": "array", "items": {"type": "string"}},
        "pi_window": {"type": ["integer", "null"], "minimum": 1},
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["node_id", "plane"],
                "additionalProperties": False,
                "properties": {
                    "node_id": {"type": "string", "minLength": 1},
                    "plane": {"enum": ["fog", "cloud"]},
                    "premises_id": {"type": ["string", "null"]},
                    "role": {"enum": ["master", "slave", "cluster_frontend", "cloud_dc"]},
                    "link": {"enum": ["wired", "wireless"]},
                    "mobile": {"type": "boolean"},
                    "cpu_capacity": _pos,
                    "heterogeneity_tag": {"type": "string"},
                },
            },
        },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b", "base_latency_ms"],
                "additionalProperties": False,
                "properties": {
                    "a": {"type": "string"},
                    "b": {"type": "string"},
                    "base_latency_ms": _pos,
                    "jitter_ms": _nonneg,
                    "kind": {"enum": ["wired", "wireless"]},
                },
            },
        },
        "access_routers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["router_id", "premises_id"],
                "additionalProperties": False,
                "properties": {"router_id": {"type": "string"}, "premises_id": {"type": "string"}},
            },
        },
        "services": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["service_id", "name", "granularity"],
                "additionalProperties": False,
                "properties": {
                    "service_id": {"type": "string", "minLength": 1},
                    "name": {"type": "string", "minLength": 1},
                    "granularity": {"enum": ["mini", "macro", "mega"]},
                    "security": {"enum": ["public", "confidential"]},
                    "payload_bytes": {"type": "integer", "minimum": 0},
                    "version": {"type": "integer", "minimum": 0},
                    "legacy": {"enum": ["calculating", "editor", "echo"]},
                    "hosts": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "workload": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["client", "service_name", "rate"],
                "additionalProperties": False,
                "properties": {
                    "client": {"type": "string"},
                    "service_name": {"type": "string"},
                    "rate": _nonneg,
                    "routing": {"enum": ["pi", "redirect"]},
                },
            },
        },
        "sensors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["sensor_id", "host_node_id"],
                "additionalProperties": False,
                "properties": {
                    "sensor_id": {"type": "string", "minLength": 1},
                    "host_node_id": {"type": "string"},
                    "kind": {"enum": ["temperature_humidity"]},
                    "interval_s": _pos,
                    "temp_range_c": _range,
                    "humidity_range_pct": _range,
                    "model": {
                        "type": "object",
                        "required": ["type"],
                        "properties": {
                            "type": {"enum": ["constant", "random_walk"]},
                            "temperature_c": {"type": "number"},
                            "humidity_pct": {"type": "number", "minimum": 0, "maximum": 100},
                            "step_sd": _nonneg,
                            "initial_temperature_c": {"type": "number"},
                            "initial_humidity_pct": {"type": "number"},
                        },
                    },
                },
            },
        },
        "placement_policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "confidential_fog_only": {"type": "boolean"},
                "mega_prefers_premises": {"type": "boolean"},
                "max_mega_hops_from_premises": {"type": "integer", "minimum": 0},
                "strict_measured": {"type": "boolean"},
            },
        },
        "band_policy": {"type": "string", "pattern": r"^(quantile|absolute:[^,]+,[^,]+)$"},
        "granularity_work": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mini": _pos, "macro": _pos, "mega": _pos},
        },
    },
}


@dataclass(frozen=True)
class ServiceConfig:
    descriptor: ServiceDescriptor
    hosts: list[str] | None = None
    legacy: str | None = None


@dataclass(frozen=True)
class WorkloadEntry:
    client: str
    service_name: str
    rate: float
    routing: str = "pi"


@dataclass
class Scenario:
    seed: int
    topology: Topology
    duration_s: float
    probe_interval_s: float
    services: list[ServiceConfig] = field(default_factory=list)
    workload: list[WorkloadEntry] = field(default_factory=list)
    sensors: list[SensorSpec] = field(default_factory=list)
    placement_policy: PlacementPolicy = field(default_factory=PlacementPolicy)
    band_policy: BandPolicy = field(default_factory=lambda: parse_band_policy("quantile"))
    pi_window: int | None = None
    granularity_work: dict[Granularity, float] = field(default_factory=lambda: dict(DEFAULT_WORK))
    prober: str | None = None
    probe_targets: list[str] | None = None

    def __post_init__(self) -> None:
        if not self.duration_s > 0:
            raise SchemaError("duration_s must be positive")
        if any(w.rate < 0 for w in self.workload):
            raise SchemaError("workload rates must be non-negative")


# -- loading -------------------------------------------------------------------

def default_config() -> dict[str, Any]:
    text = resources.files("fograph").joinpath("data/default_scenario.json").read_text("utf-8")
    return json.loads(text)


def default_config_text() -> str:
    return resources.files("fograph").joinpath("data/default_scenario.json").read_text("utf-8")


def read_config(path: str | os.PathLike[str]) -> tuple[dict[str, Any], str, str]:
    """Read a scenario file; ``"default"`` names the bundled scenario when no such file exists.

    Returns ``(config, raw_text, source_label)``. OSError propagates.
    """
    p = Path(path)
    if str(path) == "default" and not p.exists():
        text, label = default_config_text(), "<default>"
    else:
        text, label = p.read_text(encoding="utf-8"), str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, [f"{label}:{exc.lineno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise SchemaError("scenario must be a JSON object", [f"{label}:1: scenario must be a JSON object"])
    return data, text, label


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: Mapping[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` overrides; list items are addressed by index."""
    out = copy.deepcopy(dict(config))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise SchemaError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        target: Any = out
        try:
            for part in parts[:-1]:
                target = target[int(part)] if isinstance(target, list) else target.setdefault(part, {})
            last = parts[-1]
            if isinstance(target, list):
                target[int(last)] = _parse_value(raw)
            else:
                target[last] = _parse_value(raw)
        except (ValueError, IndexError, TypeError, AttributeError):
            raise SchemaError(f"override {item!r}: cannot address {key!r}") from None
    return out


def resolve_seed(cli_seed: int | None, config_seed: int | None) -> int:
    """``--seed`` beats the config's ``seed``, which beats ``$FOGRAPH_SEED``."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise SchemaError(f"{SEED_ENV}={env!r} is not an integer") from None
    return DEFAULT_SEED


# -- validation ------------------------------------------------------------------

def _locate(text: str | None, path: list[Any], value: Any) -> int:
    """Best-effort source line of the offending key (1 when unknown)."""
    if not text:
        return 1
    keys = [p for p in path if isinstance(p, str)]
    if keys:
        key = re.escape(json.dumps(keys[-1]))
        try:
            literal = re.escape(json.dumps(value))
        except TypeError:
            literal = None
        patterns = [rf"{key}\s*:\s*{literal}"] if literal and not isinstance(value, (dict, list)) else []
        patterns.append(key)
        for pat in patterns:
            m = re.search(pat, text)
            if m:
                return text.count("\n", 0, m.start()) + 1
    return 1


def _dotted(path: Iterable[Any]) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_config(config: Mapping[str, Any], text: str | None = None, label: str = "<config>") -> list[str]:
    """Return line-anchored diagnostics; an empty list means the scenario is valid."""
    diags: list[str] = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(config), key=lambda e: list(map(str, e.absolute_path))):
        path = list(err.absolute_path)
        diags.append(f"{label}:{_locate(text, path, err.instance)}: {_dotted(path)}: {err.message}")
    if diags:
        return diags
    try:
        build_scenario(config)
    except SchemaError as exc:
        for d in exc.diagnostics:
            key = d.split(":", 1)[0]
            m = re.match(r"(\w+)\[(\d+)\]\.?(\w+)?", key)
            line = 1
            if m:
                line = _locate(text, [m.group(1)] if not m.group(3) else [m.group(1), m.group(3)], None)
            diags.append(f"{label}:{line}: {d}")
    return diags


def build_scenario(config: Mapping[str, Any], seed: int | None = None) -> Scenario:
    """Turn a schema-valid config mapping into a :class:`Scenario`.

    Raises:
        SchemaError: semantic problems (unknown ids, placement violations,
            bad ranges); ``DisconnectedGraph`` for a split topology.
    """
    topo = Topology.from_config(config)
    problems: list[str] = []
    policy = PlacementPolicy(**config.get("placement_policy", {}))
    try:
        band = parse_band_policy(config.get("band_policy", "quantile"))
    except ValueError as exc:
        raise SchemaError(f"band_policy: {exc}") from None

    services: list[ServiceConfig] = []
    names: dict[str, list[ServiceDescriptor]] = {}
    seen_ids: set[str] = set()
    for i, sd in enumerate(config.get("services", [])):
        try:
            desc = ServiceDescriptor.from_dict(sd)
        except (ValueError, KeyError) as exc:
            problems.append(f"services[{i}]: {exc}")
            continue
        if desc.service_id in seen_ids:
            problems.append(f"services[{i}].service_id: duplicate id {desc.service_id!r}")
        seen_ids.add(desc.service_id)
        hosts = sd.get("hosts")
        if hosts is not None:
            try:
                allowed = set(eligible_nodes(desc, topo, policy))
            except NoEligibleNode:
                allowed = set()
            for h in hosts:
                if not topo.has_node(h):
                    problems.append(f"services[{i}].hosts: unknown node {h!r}")
                elif h not in allowed:
                    problems.append(f"services[{i}].hosts: {desc.name!r} may not be placed on {h!r}")
            if len(set(hosts)) != len(hosts):
                problems.append(f"services[{i}].hosts: duplicate host")
        services.append(ServiceConfig(desc, list(hosts) if hosts is not None else None, sd.get("legacy")))
        names.setdefault(desc.name, []).append(desc)

    workload: list[WorkloadEntry] = []
    for i, wd in enumerate(config.get("workload", [])):
        w = WorkloadEntry(wd["client"], wd["service_name"], float(wd["rate"]), wd.get("routing", "pi"))
        if not topo.has_node(w.client):
            problems.append(f"workload[{i}].client: unknown node {w.client!r}")
            continue
        if w.service_name not in names:
            problems.append(f"workload[{i}].service_name: no service named {w.service_name!r}")
            continue
        reachable = False
        for cfg in services:
            if cfg.descriptor.name != w.service_name:
                continue
            try:
                eligible_nodes(cfg.descriptor, topo, policy, w.client, among=cfg.hosts)
            except NoEligibleNode:
                continue
            reachable = True
        if not reachable:
            problems.append(f"workload[{i}].service_name: no host of {w.service_name!r} is eligible for {w.client!r}")
        workload.append(w)

    sensors: list[SensorSpec] = []
    seen_sensors: set[str] = set()
    for i, sd in enumerate(config.get("sensors", [])):
        try:
            spec = SensorSpec.from_dict(sd)
        except (ValueError, KeyError) as exc:
            problems.append(f"sensors[{i}]: {exc}")
            continue
        if not topo.has_node(spec.host_node_id):
            problems.append(f"sensors[{i}].host_node_id: unknown node {spec.host_node_id!r}")
        if spec.sensor_id in seen_sensors:
            problems.append(f"sensors[{i}].sensor_id: duplicate id {spec.sensor_id!r}")
        seen_sensors.add(spec.sensor_id)
        sensors.append(spec)

    prober = config.get("prober")
    if prober is not None and not topo.has_node(prober):
        problems.append(f"prober: unknown node {prober!r}")
    targets = config.get("probe_targets")
    for t in targets or []:
        if not topo.has_node(t):
            problems.append(f"probe_targets: unknown node {t!r}")

    work = dict(DEFAULT_WORK)
    for k, v in config.get("granularity_work", {}).items():
        work[Granularity(k)] = float(v)

    if problems:
        raise SchemaError(problems[0], problems)
    return Scenario(
        seed=resolve_seed(seed, config.get("seed")),
        topology=topo,
        duration_s=config["duration_s"],
        probe_interval_s=config["probe_interval_s"],
        services=services,
        workload=workload,
        sensors=sensors,
        placement_policy=policy,
        band_policy=band,
        pi_window=config.get("pi_window"),
        granularity_work=work,
        prober=prober,
        probe_targets=list(targets) if targets is not None else None,
    )


def load_scenario(
    path: str | os.PathLike[str],
    overrides: Iterable[str] = (),
    seed: int | None = None,
) -> Scenario:
    config, text, label = read_config(path)
    config = apply_overrides(config, overrides)
    diags = validate_config(config, text, label)
    if diags:
        raise SchemaError(diags[0], diags)
    return build_scenario(config, seed=seed)


def scenario_from_config(config: Mapping[str, Any], seed: int | None = None) -> Scenario:
    """Validate then build; for configs that never touched disk."""
    diags = validate_config(config)
    if diags:
        raise SchemaError(diags[0], diags)
    return build_scenario(config, seed=seed)
