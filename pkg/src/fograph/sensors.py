"""Simulated temperature/humidity sensor nodes and their time-series store.

A sensor is polled on a fixed interval; each reading lands in a
:class:`SensorStore`, from which the temperature and humidity services
answer range queries, summaries and CSV exports.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Union

import numpy as np

from fograph.errors import EmptySeries, InvalidInterval, SchemaError, UnknownSensor

CSV_HEADER = ("sensor_id", "at_s", "temperature_c", "humidity_pct")
DEFAULT_POLL_INTERVAL_S = 60.0
DEFAULT_TEMP_RANGE_C = (-40.0, 80.0)
DEFAULT_HUMIDITY_RANGE_PCT = (0.0, 100.0)


@dataclass(frozen=True)
class Constant:
    temperature_c: float
    humidity_pct: float = 50.0


@dataclass(frozen=True)
class RandomWalk:
    """Gaussian random walk; starts from the range midpoints unless told otherwise."""

    step_sd: float
    initial_temperature_c: float | None = None
    initial_humidity_pct: float | None = None

    def __post_init__(self) -> None:
        if self.step_sd < 0:
            raise ValueError("step_sd must be >= 0")


SensorModel = Union[Constant, RandomWalk]


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    host_node_id: str
    model: SensorModel
    temp_range_c: tuple[float, float] = DEFAULT_TEMP_RANGE_C
    humidity_range_pct: tuple[float, float] = DEFAULT_HUMIDITY_RANGE_PCT
    kind: str = "temperature_humidity"
    interval_s: float = DEFAULT_POLL_INTERVAL_S

    def __post_init__(self) -> None:
        lo, hi = self.temp_range_c
        if lo > hi:
            raise ValueError(f"{self.sensor_id}: temp_range_c min exceeds max")
        lo, hi = self.humidity_range_pct
        if lo > hi or lo < 0 or hi > 100:
            raise ValueError(f"{self.sensor_id}: humidity_range_pct must be an ordered pair within [0, 100]")
        if not self.interval_s > 0:
            raise ValueError(f"{self.sensor_id}: interval_s must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SensorSpec:
        m = data.get("model", {"type": "constant", "temperature_c": 20.0})
        if m.get("type") == "constant":
            model: SensorModel = Constant(m["temperature_c"], m.get("humidity_pct", 50.0))
        elif m.get("type") == "random_walk":
            model = RandomWalk(m["step_sd"], m.get("initial_temperature_c"), m.get("initial_humidity_pct"))
        else:
            raise SchemaError(f"sensor {data.get('sensor_id')!r}: unknown model type {m.get('type')!r}")
        return cls(
            sensor_id=data["sensor_id"],
            host_node_id=data["host_node_id"],
            model=model,
            temp_range_c=tuple(data.get("temp_range_c", DEFAULT_TEMP_RANGE_C)),
            humidity_range_pct=tuple(data.get("humidity_range_pct", DEFAULT_HUMIDITY_RANGE_PCT)),
            interval_s=data.get("interval_s", DEFAULT_POLL_INTERVAL_S),
        )


@dataclass(frozen=True)
class SensorReading:
    sensor_id: str
    at: float
    temperature_c: float
    humidity_pct: float


def _clamp(x: float, bounds: tuple[float, float]) -> float:
    return min(max(x, bounds[0]), bounds[1])


def read_sensor(
    spec: SensorSpec,
    at: float,
    rng: np.random.Generator,
    previous: SensorReading | None = None,
) -> SensorReading:
    """Take one reading at simulated time ``at``.

    A random walk draws temperature then humidity steps from ``rng`` and
    moves from ``previous`` (or the configured start) before clamping.
    """
    model = spec.model
    if isinstance(model, Constant):
        temp, hum = model.temperature_c, model.humidity_pct
    else:
        if previous is not None:
            t0, h0 = previous.temperature_c, previous.humidity_pct
        else:
            t0 = model.initial_temperature_c
            h0 = model.initial_humidity_pct
            if t0 is None:
                t0 = sum(spec.temp_range_c) / 2
            if h0 is None:
                h0 = sum(spec.humidity_range_pct) / 2
        dt, dh = rng.normal(0.0, model.step_sd, size=2) if model.step_sd > 0 else (0.0, 0.0)
        temp, hum = t0 + float(dt), h0 + float(dh)
    return SensorReading(
        spec.sensor_id, at, _clamp(float(temp), spec.temp_range_c), _clamp(float(hum), spec.humidity_range_pct)
    )


def poll_times(interval_s: float, duration_s: float) -> list[float]:
    """Poll instants ``interval, 2*interval, ...`` up to and including ``duration``."""
    if not interval_s > 0:
        raise InvalidInterval(f"interval must be positive, got {interval_s}")
    # integer microseconds keep the tick count exact for decimal inputs
    step, end = round(interval_s * 1_000_000), round(duration_s * 1_000_000)
    return [k * step / 1_000_000 for k in range(1, end // step + 1)]


def poll_series(
    spec: SensorSpec,
    interval_s: float,
    duration_s: float,
    rng: np.random.Generator,
) -> list[SensorReading]:
    readings: list[SensorReading] = []
    for t in poll_times(interval_s, duration_s):
        readings.append(read_sensor(spec, t, rng, readings[-1] if readings else None))
    return readings


class SensorStore:
    """Append-only per-sensor reading series with time-range queries."""

    def __init__(self, specs: Iterable[SensorSpec] = ()) -> None:
        self._lock = threading.Lock()
        self._specs: dict[str, SensorSpec] = {}
        self._series: dict[str, list[SensorReading]] = {}
        for spec in specs:
            self.add_sensor(spec)

    def add_sensor(self, spec: SensorSpec) -> None:
        with self._lock:
            self._specs[spec.sensor_id] = spec
            self._series.setdefault(spec.sensor_id, [])

    @property
    def sensor_ids(self) -> list[str]:
        return sorted(self._specs)

    def spec(self, sensor_id: str) -> SensorSpec:
        try:
            return self._specs[sensor_id]
        except KeyError:
            raise UnknownSensor(sensor_id) from None

    def store_reading(self, reading: SensorReading) -> None:
        spec = self.spec(reading.sensor_id)
        t_lo, t_hi = spec.temp_range_c
        h_lo, h_hi = spec.humidity_range_pct
        if not (t_lo <= reading.temperature_c <= t_hi and h_lo <= reading.humidity_pct <= h_hi):
            raise ValueError(f"reading {reading} lies outside the ranges of {spec.sensor_id!r}")
        with self._lock:
            series = self._series[reading.sensor_id]
            if series and reading.at <= series[-1].at:
                raise ValueError(f"{reading.sensor_id}: timestamp {reading.at} is not after {series[-1].at}")
            series.append(reading)

    def _get(self, sensor_id: str) -> list[SensorReading]:
        try:
            return self._series[sensor_id]
        except KeyError:
            raise UnknownSensor(sensor_id) from None

    def series(self, sensor_id: str) -> list[SensorReading]:
        with self._lock:
            return list(self._get(sensor_id))

    def query_latest(self, sensor_id: str) -> SensorReading:
        with self._lock:
            series = self._get(sensor_id)
            if not series:
                raise EmptySeries(f"no readings for {sensor_id!r}")
            return series[-1]

    def query_range(self, sensor_id: str, t0: float, t1: float) -> list[SensorReading]:
        with self._lock:
            series = self._get(sensor_id)
            if t1 < t0:
                return []
            times = [r.at for r in series]
            return series[bisect_left(times, t0):bisect_right(times, t1)]

    def summarize(self, sensor_id: str, t0: float = -math.inf, t1: float = math.inf) -> dict[str, float]:
        rows = self.query_range(sensor_id, t0, t1)
        if not rows:
            raise EmptySeries(f"no readings for {sensor_id!r} in [{t0}, {t1}]")
        temps = [r.temperature_c for r in rows]
        hums = [r.humidity_pct for r in rows]
        return {
            "count": len(rows),
            "mean_temp": math.fsum(temps) / len(temps),
            "min_temp": min(temps),
            "max_temp": max(temps),
            "mean_humidity": math.fsum(hums) / len(hums),
            "min_humidity": min(hums),
            "max_humidity": max(hums),
        }

    def export_csv(self, sensor_id: str, t0: float = -math.inf, t1: float = math.inf) -> bytes:
        rows = self.query_range(sensor_id, t0, t1)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.sensor_id, f"{r.at:.3f}", f"{r.temperature_c:.3f}", f"{r.humidity_pct:.3f}"])
        return buf.getvalue().encode("utf-8")


def parse_csv(data: bytes) -> list[SensorReading]:
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return [SensorReading(sid, float(at), float(t), float(h)) for sid, at, t, h in reader]


class TemperatureService:
    """Query service over the temperature column of a sensor store."""

    name = "temperature-service"

    def __init__(self, store: SensorStore) -> None:
        self.store = store

    def series(self, sensor_id: str, t0: float = -math.inf, t1: float = math.inf) -> list[tuple[float, float]]:
        return [(r.at, r.temperature_c) for r in self.store.query_range(sensor_id, t0, t1)]

    def latest(self, sensor_id: str) -> float:
        return self.store.query_latest(sensor_id).temperature_c


class HumidityService:
    name = "humidity-service"

    def __init__(self, store: SensorStore) -> None:
        self.store = store

    def series(self, sensor_id: str, t0: float = -math.inf, t1: float = math.inf) -> list[tuple[float, float]]:
        return [(r.at, r.humidity_pct) for r in self.store.query_range(sensor_id, t0, t1)]

    def latest(self, sensor_id: str) -> float:
        return self.store.query_latest(sensor_id).humidity_pct
