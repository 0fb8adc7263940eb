"""Response-time samples, Priority Index aggregation and band classification.

Every host accumulates response-time samples. A host's Priority Index (PI)
is the mean of its samples, and the total response time of a set of hosts
is the sum of every host's summed samples. Hosts are then colored blue
(recommended), yellow (use with caution) or red (avoid). A host with no
samples is shown as unmeasured.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence, Union

from fograph.errors import InvalidPolicy, NegativeRt, UnknownNode

Number = Union[float, Fraction]


class Source(str, Enum):
    PROBE = "probe"
    REQUEST = "request"


class Band(str, Enum):
    BLUE = "blue"
    YELLOW = "yellow"
    RED = "red"
    UNMEASURED = "unmeasured"

    @property
    def order(self) -> int:
        return _BAND_ORDER[self]


_BAND_ORDER = {Band.BLUE: 0, Band.YELLOW: 1, Band.RED: 2, Band.UNMEASURED: 3}
DOT_COLORS = {Band.BLUE: "blue", Band.YELLOW: "yellow", Band.RED: "red", Band.UNMEASURED: "gray"}


@dataclass(frozen=True)
class RtSample:
    node_id: str
    rt_ms: Number
    at: float = 0.0
    source: Source = Source.PROBE


@dataclass(frozen=True)
class PiRecord:
    node_id: str
    total_rt_ms: Number
    sample_count: int
    pi_ms: Number | None
    band: Band = Band.UNMEASURED

    @property
    def measured(self) -> bool:
        return self.sample_count > 0

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "pi_ms": None if self.pi_ms is None else float(self.pi_ms),
            "sample_count": self.sample_count,
            "band": self.band.value,
        }


# -- band policies -----------------------------------------------------------

@dataclass(frozen=True)
class QuantilePolicy:
    """Nearest-rank terciles over the measured PIs.

    Blue up to the 1/3 nearest-rank percentile, red strictly above the 2/3
    one, yellow in between. A PI equal to a cut value takes the better band.
    """

    name = "quantile"

    def __str__(self) -> str:
        return "quantile"


@dataclass(frozen=True)
class AbsolutePolicy:
    blue_max: float
    yellow_max: float

    name = "absolute"

    def __post_init__(self) -> None:
        if self.blue_max > self.yellow_max:
            raise InvalidPolicy(f"blue_max {self.blue_max} exceeds yellow_max {self.yellow_max}")

    def __str__(self) -> str:
        return f"absolute:{_fmt(self.blue_max)},{_fmt(self.yellow_max)}"


BandPolicy = Union[QuantilePolicy, AbsolutePolicy]


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_band_policy(text: str | None) -> BandPolicy:
    """Parse ``"quantile"`` or ``"absolute:<blue_max>,<yellow_max>"``."""
    if text is None or text == "quantile":
        return QuantilePolicy()
    kind, _, rest = text.partition(":")
    if kind != "absolute" or not rest:
        raise InvalidPolicy(f"unrecognized band policy {text!r}")
    try:
        blue, yellow = (float(x) for x in rest.split(","))
    except ValueError:
        raise InvalidPolicy(f"absolute policy needs two numbers, got {rest!r}") from None
    return AbsolutePolicy(blue, yellow)


def nearest_rank(sorted_values: Sequence[Number], fraction: Fraction) -> Number:
    """Nearest-rank percentile: the value at 1-based rank ceil(fraction * n)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(fraction * n))
    return sorted_values[rank - 1]


def quantile_thresholds(pis: Iterable[Number]) -> tuple[Number, Number] | None:
    values = sorted(pis)
    if not values:
        return None
    return nearest_rank(values, Fraction(1, 3)), nearest_rank(values, Fraction(2, 3))


def resolve_thresholds(records: Iterable[PiRecord], policy: BandPolicy) -> tuple[Number, Number] | None:
    if isinstance(policy, AbsolutePolicy):
        return policy.blue_max, policy.yellow_max
    if isinstance(policy, QuantilePolicy):
        return quantile_thresholds(r.pi_ms for r in records if r.measured)
    raise InvalidPolicy(f"unknown band policy {policy!r}")


def classify(records: Sequence[PiRecord], policy: BandPolicy | None = None) -> list[PiRecord]:
    """Return copies of ``records`` with their ``band`` set under ``policy``."""
    policy = policy or QuantilePolicy()
    if isinstance(policy, AbsolutePolicy) and policy.blue_max > policy.yellow_max:
        raise InvalidPolicy(f"blue_max {policy.blue_max} exceeds yellow_max {policy.yellow_max}")
    cuts = resolve_thresholds(records, policy)
    out = []
    for r in records:
        if not r.measured:
            out.append(replace(r, band=Band.UNMEASURED))
            continue
        blue_max, yellow_max = cuts
        if r.pi_ms <= blue_max:
            band = Band.BLUE
        elif r.pi_ms <= yellow_max:
            band = Band.YELLOW
        else:
            band = Band.RED
        out.append(replace(r, band=band))
    return out


# -- priority map ------------------------------------------------------------

@dataclass(frozen=True)
class PriorityMap:
    generated_at: float
    records: list[PiRecord]
    thresholds: tuple[Number, Number] | None
    policy: BandPolicy = field(default_factory=QuantilePolicy)

    def record(self, node_id: str) -> PiRecord:
        for r in self.records:
            if r.node_id == node_id:
                return r
        raise UnknownNode(node_id)

    def bands(self) -> dict[str, Band]:
        return {r.node_id: r.band for r in self.records}

    def to_dict(self) -> dict:
        return {
            "generated_at": float(self.generated_at),
            "policy": str(self.policy),
            "thresholds": None if self.thresholds is None else [float(t) for t in self.thresholds],
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_dot(self, edges: Iterable[tuple[str, str]] = (), routers: Iterable[str] = ()) -> str:
        """Graphviz rendering: one filled node per host, topology edges as-is.

        Routers, when listed, are drawn as uncolored diamonds so the edges
        that pass through them still connect.
        """
        lines = ["graph priority_map {", "  node [style=filled, fontname=Helvetica];"]
        for r in self.records:
            label = r.node_id if r.pi_ms is None else f"{r.node_id}\\n{float(r.pi_ms):.3f} ms"
            lines.append(f'  "{r.node_id}" [fillcolor={DOT_COLORS[r.band]}, label="{label}"];')
        for router in sorted(set(routers)):
            lines.append(f'  "{router}" [shape=diamond, style=solid];')
        for a, b in sorted(tuple(sorted(e)) for e in edges):
            lines.append(f'  "{a}" -- "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- sample store ------------------------------------------------------------

class MetricsStore:
    """Per-node response-time samples.

    Args:
        node_ids: Hosts samples may be recorded for. More can be added with
            :meth:`add_node`.
        exact: Carry sums in :class:`fractions.Fraction` instead of floats.
        pi_window: If set, a node's PI only uses its last ``pi_window``
            samples. Totals always use every sample.
        policy: Band policy used when a single record's band is requested.
    """

    def __init__(
        self,
        node_ids: Iterable[str] = (),
        exact: bool = False,
        pi_window: int | None = None,
        policy: BandPolicy | None = None,
    ) -> None:
        if pi_window is not None and pi_window < 1:
            raise ValueError("pi_window must be a positive integer")
        self._lock = threading.Lock()
        self._samples: dict[str, list[RtSample]] = {n: [] for n in node_ids}
        self.exact = exact
        self.pi_window = pi_window
        self.policy = policy or QuantilePolicy()

    def add_node(self, node_id: str) -> None:
        with self._lock:
            self._samples.setdefault(node_id, [])

    @property
    def node_ids(self) -> list[str]:
        return sorted(self._samples)

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._samples.values())

    def record_sample(self, sample: RtSample) -> None:
        if sample.rt_ms < 0:
            raise NegativeRt(f"rt_ms must be >= 0, got {sample.rt_ms}")
        rt = Fraction(sample.rt_ms) if self.exact else float(sample.rt_ms)
        with self._lock:
            series = self._samples.get(sample.node_id)
            if series is None:
                raise UnknownNode(sample.node_id)
            if series and sample.at < series[-1].at:
                raise ValueError(
                    f"sample for {sample.node_id!r} at {sample.at} precedes last sample at {series[-1].at}"
                )
            series.append(replace(sample, rt_ms=rt, source=Source(sample.source)))

    def samples(self, node_id: str) -> list[RtSample]:
        with self._lock:
            if node_id not in self._samples:
                raise UnknownNode(node_id)
            return list(self._samples[node_id])

    def _sum(self, values: Iterable[Number]) -> Number:
        if self.exact:
            return sum(values, Fraction(0))
        return math.fsum(values)

    def _snapshot(self, node_ids: Iterable[str]) -> dict[str, list[RtSample]]:
        with self._lock:
            out = {}
            for n in node_ids:
                if n not in self._samples:
                    raise UnknownNode(n)
                out[n] = list(self._samples[n])
            return out

    def total_response_time(self, node_ids: Iterable[str]) -> Number:
        """Sum over the given hosts of each host's summed response time."""
        snap = self._snapshot(set(node_ids))
        per_host = [self._sum(s.rt_ms for s in snap[n]) for n in sorted(snap)]
        return self._sum(per_host)

    def _raw_record(self, node_id: str, series: list[RtSample]) -> PiRecord:
        if self.pi_window is not None:
            series = series[-self.pi_window:]
        count = len(series)
        if count == 0:
            return PiRecord(node_id, self._sum(()), 0, None, Band.UNMEASURED)
        total = self._sum(s.rt_ms for s in series)
        return PiRecord(node_id, total, count, total / count, Band.UNMEASURED)

    def raw_records(self, node_ids: Iterable[str] | None = None) -> list[PiRecord]:
        ids = self.node_ids if node_ids is None else sorted(set(node_ids))
        snap = self._snapshot(ids)
        return [self._raw_record(n, snap[n]) for n in ids]

    def priority_index(self, node_id: str) -> PiRecord:
        """PI record for one host, banded against every host in the store."""
        if node_id not in self._samples:
            raise UnknownNode(node_id)
        for r in classify(self.raw_records(), self.policy):
            if r.node_id == node_id:
                return r
        raise UnknownNode(node_id)  # pragma: no cover

    def cluster_priority_index(self, node_ids: Iterable[str]) -> Number | None:
        """Mean over every sample of the given hosts, or None if there are none."""
        snap = self._snapshot(set(node_ids))
        count = sum(len(s) for s in snap.values())
        if count == 0:
            return None
        return self.total_response_time(snap) / count

    def pi_table(self, node_ids: Iterable[str] | None = None) -> dict[str, PiRecord]:
        return {r.node_id: r for r in classify(self.raw_records(node_ids), self.policy)}

    def priority_map(
        self,
        cluster: Iterable[str] | None = None,
        policy: BandPolicy | None = None,
        generated_at: float | None = None,
    ) -> PriorityMap:
        policy = policy or self.policy
        raw = self.raw_records(cluster)
        if generated_at is None:
            snap = self._snapshot(r.node_id for r in raw)
            generated_at = max((s[-1].at for s in snap.values() if s), default=0.0)
        return PriorityMap(generated_at, classify(raw, policy), resolve_thresholds(raw, policy), policy)
