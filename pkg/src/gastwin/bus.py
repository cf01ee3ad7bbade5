"""In-process telemetry bus, message schemas, and simulated sensors.

Stands in for the field-to-center path: wireless pressure and valve-position
sensors publish onto an ordered bus; the control center and the stream
service consume filtered views of it. Delivery is exactly-once and in publish
order per subscriber, and the publisher never blocks on a consumer.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, SchemaError

SCHEMA_VERSION = "1"

ENVELOPE_FIELDS = {"schema_version", "kind", "time_s", "source"}

#: kind -> (required extra fields, allowed extra fields)
_KIND_FIELDS: dict[str, tuple[set[str], set[str]]] = {
    "pressure_sample": ({"x_m", "pressure_pa", "payload"}, set()),
    "valve_position": ({"valve_state", "payload"}, set()),
    "command": ({"payload"}, set()),
    "verdict": ({"payload"}, set()),
    "journal": ({"payload"}, set()),
}

_PAYLOAD_REQUIRED: dict[str, set[str]] = {
    "pressure_sample": {"line_id"},
    "valve_position": {"valve_id"},
    "command": {"action", "valve_id", "operator_id"},
}


def validate_message(msg: dict) -> dict:
    """Schema-check one message dict; returns it unchanged when valid."""
    if not isinstance(msg, dict):
        raise SchemaError("message must be an object")
    missing = ENVELOPE_FIELDS - set(msg)
    if missing:
        raise SchemaError(f"missing envelope field(s): {sorted(missing)}")
    if msg["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {msg['schema_version']!r}")
    kind = msg["kind"]
    if kind not in _KIND_FIELDS:
        raise SchemaError(f"unknown kind {kind!r}")
    if not isinstance(msg["time_s"], (int, float)) or msg["time_s"] < 0:
        raise SchemaError("time_s must be a non-negative number")
    required, _ = _KIND_FIELDS[kind]
    body = set(msg) - ENVELOPE_FIELDS - {"seq"}
    missing = required - body
    if missing:
        raise SchemaError(f"kind {kind}: missing field(s) {sorted(missing)}")
    extra = body - required
    if extra:
        raise SchemaError(f"kind {kind}: unexpected field(s) {sorted(extra)}")
    want_payload = _PAYLOAD_REQUIRED.get(kind)
    if want_payload is not None:
        payload = msg.get("payload")
        if not isinstance(payload, dict):
            raise SchemaError(f"kind {kind}: payload must be an object")
        pm = want_payload - set(payload)
        if pm:
            raise SchemaError(f"kind {kind}: payload missing {sorted(pm)}")
    return msg


def make_message(kind: str, time_s: float, source: str, **fields) -> dict:
    msg = {"schema_version": SCHEMA_VERSION, "kind": kind, "time_s": time_s, "source": source}
    msg.update(fields)
    return validate_message(msg)


def message_line(msg: dict) -> str:
    """One NDJSON wire line (stable key order for byte-reproducible logs)."""
    return json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n"


def parse_message_line(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return validate_message(obj)


class Subscription:
    """Filtered, ordered view of the bus for one consumer."""

    def __init__(self, kinds: set[str] | None, sources: set[str] | None):
        self.kinds = kinds
        self.sources = sources
        self._queue: deque[dict] = deque()

    def matches(self, msg: dict) -> bool:
        if self.kinds is not None and msg["kind"] not in self.kinds:
            return False
        if self.sources is not None and msg["source"] not in self.sources:
            return False
        return True

    def push(self, msg: dict) -> None:
        self._queue.append(msg)

    def drain(self) -> list[dict]:
        out = list(self._queue)
        self._queue.clear()
        return out

    def __len__(self) -> int:
        return len(self._queue)


class TelemetryBus:
    """Single-producer ordered bus with per-subscriber queues.

    ``publish`` validates, stamps a monotone ``seq``, and fans out to every
    matching subscriber plus any attached taps (used by the stream service).
    Taps must never block; they receive the serialized line.
    """

    def __init__(self):
        self._seq = 0
        self._subs: list[Subscription] = []
        self._taps: list[Callable[[dict, str], None]] = []
        self.log: list[dict] = []

    def subscribe(
        self,
        kinds: Iterable[str] | None = None,
        sources: Iterable[str] | None = None,
    ) -> Subscription:
        sub = Subscription(
            set(kinds) if kinds is not None else None,
            set(sources) if sources is not None else None,
        )
        self._subs.append(sub)
        return sub

    def add_tap(self, tap: Callable[[dict, str], None]) -> None:
        self._taps.append(tap)

    def publish(self, msg: dict) -> dict:
        validate_message(msg)
        self._seq += 1
        msg = dict(msg)
        msg["seq"] = self._seq
        self.log.append(msg)
        for sub in self._subs:
            if sub.matches(msg):
                sub.push(msg)
        if self._taps:
            line = message_line(msg)
            for tap in self._taps:
                tap(msg, line)
        return msg


@dataclass(frozen=True)
class SensorConfig:
    """Placement and cadence of one wireless pressure sensor."""

    sensor_id: str
    x: float
    line_id: str
    sample_period: float = 10.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.sample_period <= 0:
            raise ConfigurationError("sample_period must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")


def default_sensor_configs(
    sites: Sequence[float],
    line_ids: Sequence[str] = ("line_1", "line_2"),
    *,
    sample_period: float = 10.0,
    noise_sigma: float = 0.0,
) -> list[SensorConfig]:
    configs = []
    for line in line_ids:
        for x in sites:
            configs.append(
                SensorConfig(
                    sensor_id=f"ps-{line}-{int(x)}",
                    x=x,
                    line_id=line,
                    sample_period=sample_period,
                    noise_sigma=noise_sigma,
                )
            )
    return configs


def sample_sensors(
    pressure_at: Callable[[str, float, float], float],
    t: float,
    configs: Sequence[SensorConfig],
    rng: np.random.Generator,
    *,
    length_L: float | None = None,
) -> list[dict]:
    """Messages from every sensor due at tick ``t``.

    ``pressure_at(line_id, x, t)`` is the model view of the world. Sensors
    fire when t is a multiple of their period; gaussian noise is added only
    when configured, drawn in fixed config order for seed reproducibility.
    """
    out = []
    for cfg in configs:
        if length_L is not None and not 0.0 <= cfg.x <= length_L:
            raise ConfigurationError(f"sensor {cfg.sensor_id} at x={cfg.x} is off the line")
        remainder = t % cfg.sample_period
        if min(remainder, cfg.sample_period - remainder) > 1e-9:
            continue
        value = pressure_at(cfg.line_id, cfg.x, t)
        if cfg.noise_sigma > 0:
            value += float(rng.normal(0.0, cfg.noise_sigma))
        out.append(
            make_message(
                "pressure_sample",
                t,
                cfg.sensor_id,
                x_m=cfg.x,
                pressure_pa=value,
                payload={"line_id": cfg.line_id},
            )
        )
    return out


def valve_position_message(t: float, valve_id: str, state: str, cause: str) -> dict:
    """Position-sensor report of a committed valve transition."""
    return make_message(
        "valve_position",
        t,
        f"vpos-{valve_id}",
        valve_state=state,
        payload={"valve_id": valve_id, "cause": cause},
    )
