"""Shut-off and connecting-valve state machines.

Shut-off valves close themselves when the local pressure drop rate crosses
their calibrated threshold; each is paired with the valve bracketing the same
crossover interval, and a position-sensor event on one commands the other.
Connecting (pneumatic) valves only move on control-center or operator
commands. Valve travel is instantaneous at the simulation tick scale.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import RegistryError

MPA_PER_MIN = 1e6 / 60.0  # Pa/s per MPa/min

DROP_RATE_MIN = 0.1 * MPA_PER_MIN
DROP_RATE_MAX = 0.5 * MPA_PER_MIN
DROP_RATE_DEFAULT = 0.2 * MPA_PER_MIN

RATE_WINDOW_S = 60.0  # rolling least-squares horizon for the drop-rate estimate


class ValveState(str, Enum):
    OPEN = "open"
    CLOSING = "closing"
    CLOSED = "closed"


class ValveKind(str, Enum):
    SHUTOFF = "shutoff"
    CONNECTING = "connecting_pneumatic"


class EventCause(str, Enum):
    DROP_RATE_TRIGGER = "drop_rate_trigger"
    POSITION_SENSOR_PAIRING = "position_sensor_pairing"
    CONTROL_CENTER_COMMAND = "control_center_command"
    OPERATOR_COMMAND = "operator_command"


@dataclass(frozen=True)
class Valve:
    """One valve with its placement, pairing, and trigger calibration."""

    valve_id: str
    kind: ValveKind
    position_x: float
    line_id: str
    state: ValveState = ValveState.OPEN
    paired_valve_id: str | None = None
    drop_rate_threshold: float = DROP_RATE_DEFAULT  # Pa/s

    def __post_init__(self):
        if self.kind is ValveKind.SHUTOFF:
            if not DROP_RATE_MIN - 1e-9 <= self.drop_rate_threshold <= DROP_RATE_MAX + 1e-9:
                raise ValueError(
                    f"drop_rate_threshold {self.drop_rate_threshold:.1f} Pa/s outside "
                    f"the calibrated band [{DROP_RATE_MIN:.1f}, {DROP_RATE_MAX:.1f}]"
                )
        elif self.paired_valve_id is not None:
            raise ValueError("connecting valves have no pairing")


@dataclass(frozen=True)
class ValveEvent:
    """One committed state transition, totally ordered by (time, valve id)."""

    time_s: float
    valve_id: str
    cause: EventCause
    from_state: ValveState
    to_state: ValveState

    def sort_key(self) -> tuple[float, str]:
        return (self.time_s, self.valve_id)

    def to_record(self) -> dict:
        return {
            "time_s": self.time_s,
            "valve_id": self.valve_id,
            "cause": self.cause.value,
            "from_state": self.from_state.value,
            "to_state": self.to_state.value,
        }


@dataclass(frozen=True)
class ValveCommand:
    """A pending transition request; applied at ``apply_at_s``."""

    valve_id: str
    action: str  # "open" | "close"
    cause: EventCause
    issued_at_s: float
    apply_at_s: float
    operator_id: str | None = None


def drop_rate(window: Sequence[tuple[float, float]]) -> float:
    """Least-squares pressure decline rate (Pa/s, positive = falling)."""
    n = len(window)
    ts = [t for t, _ in window]
    ps = [p for _, p in window]
    t_mean = sum(ts) / n
    p_mean = sum(ps) / n
    num = sum((t - t_mean) * (p - p_mean) for t, p in window)
    den = sum((t - t_mean) ** 2 for t in ts)
    if den == 0.0:
        return 0.0
    return -(num / den)


def step_valve(
    valve: Valve,
    pressure_window: Sequence[tuple[float, float]],
    dt: float,
) -> list[ValveEvent]:
    """Evaluate the drop-rate trigger for one valve over its recent samples.

    Emits a single close event iff the valve is an open shut-off valve and
    the windowed decline rate reaches its threshold. A window shorter than
    the estimation horizon never triggers.
    """
    if valve.kind is not ValveKind.SHUTOFF or valve.state is not ValveState.OPEN:
        return []
    if len(pressure_window) < 2:
        return []
    span = pressure_window[-1][0] - pressure_window[0][0]
    if span + 1e-9 < RATE_WINDOW_S:
        return []
    rate = drop_rate(pressure_window)
    if rate >= valve.drop_rate_threshold:
        now = pressure_window[-1][0]
        return [
            ValveEvent(
                time_s=now,
                valve_id=valve.valve_id,
                cause=EventCause.DROP_RATE_TRIGGER,
                from_state=ValveState.OPEN,
                to_state=ValveState.CLOSED,
            )
        ]
    return []


def propagate_pairing(
    event: ValveEvent,
    registry: Mapping[str, Valve],
    *,
    pairing_latency_s: float = 1.0,
) -> list[ValveCommand]:
    """Close command for the partner valve across the leak, when still open.

    Idempotent: an already closed or closing partner yields no command, so a
    pairing echo cannot loop.
    """
    if event.to_state is not ValveState.CLOSED:
        return []
    if event.valve_id not in registry:
        raise RegistryError(event.valve_id)
    valve = registry[event.valve_id]
    if valve.kind is not ValveKind.SHUTOFF or valve.paired_valve_id is None:
        return []
    if valve.paired_valve_id not in registry:
        raise RegistryError(valve.paired_valve_id)
    partner = registry[valve.paired_valve_id]
    if partner.state is not ValveState.OPEN:
        return []
    return [
        ValveCommand(
            valve_id=partner.valve_id,
            action="close",
            cause=EventCause.POSITION_SENSOR_PAIRING,
            issued_at_s=event.time_s,
            apply_at_s=event.time_s + pairing_latency_s,
        )
    ]


@dataclass(frozen=True)
class ApplyResult:
    """Outcome of one command application."""

    valve: Valve
    event: ValveEvent | None
    rejection: str | None = None


def apply_command(valve: Valve, command: ValveCommand, time_s: float) -> ApplyResult:
    """Apply one command, enforcing legal transitions.

    Close: open -> closed, any valve kind. Open: closed -> open, connecting
    valves only (shut-off valves stay closed until repair, which is outside
    this model). Illegal transitions return a rejection record and leave the
    valve unchanged.
    """
    if command.valve_id != valve.valve_id:
        raise RegistryError(f"command for {command.valve_id} applied to {valve.valve_id}")
    if command.action == "close":
        if valve.state is ValveState.OPEN:
            new = dataclasses.replace(valve, state=ValveState.CLOSED)
            return ApplyResult(
                valve=new,
                event=ValveEvent(time_s, valve.valve_id, command.cause,
                                 ValveState.OPEN, ValveState.CLOSED),
            )
        return ApplyResult(valve, None, f"{valve.valve_id} already {valve.state.value}")
    if command.action == "open":
        if valve.kind is not ValveKind.CONNECTING:
            return ApplyResult(valve, None, f"{valve.valve_id} is a shut-off valve; reopen not allowed")
        if command.cause not in (EventCause.CONTROL_CENTER_COMMAND, EventCause.OPERATOR_COMMAND):
            return ApplyResult(valve, None, "connecting valves open only on center/operator command")
        if valve.state is ValveState.CLOSED:
            new = dataclasses.replace(valve, state=ValveState.OPEN)
            return ApplyResult(
                valve=new,
                event=ValveEvent(time_s, valve.valve_id, command.cause,
                                 ValveState.CLOSED, ValveState.OPEN),
            )
        return ApplyResult(valve, None, f"{valve.valve_id} already {valve.state.value}")
    return ApplyResult(valve, None, f"unknown action {command.action!r}")


def build_benchmark_registry(
    l1: float,
    l3: float,
    *,
    damaged_line: str = "line_2",
    healthy_line: str = "line_1",
    threshold: float = DROP_RATE_DEFAULT,
) -> dict[str, Valve]:
    """Valve set for one bracketed leak interval on the damaged line.

    Two paired shut-off valves bracketing [l1, l3] on the damaged line, their
    (unpaired-interval) counterparts on the healthy line, and one initially
    closed connecting valve per crossover.
    """

    def shutoff(line: str, x: float, pair: str | None) -> Valve:
        return Valve(
            valve_id=f"sv-{line}-{int(x)}",
            kind=ValveKind.SHUTOFF,
            position_x=x,
            line_id=line,
            paired_valve_id=pair,
            drop_rate_threshold=threshold,
        )

    registry: dict[str, Valve] = {}
    left = shutoff(damaged_line, l1, f"sv-{damaged_line}-{int(l3)}")
    right = shutoff(damaged_line, l3, f"sv-{damaged_line}-{int(l1)}")
    registry[left.valve_id] = left
    registry[right.valve_id] = right
    for x in (l1, l3):
        hv = shutoff(healthy_line, x, None)
        registry[hv.valve_id] = hv
        cv = Valve(
            valve_id=f"cv-x{int(x)}",
            kind=ValveKind.CONNECTING,
            position_x=x,
            line_id=f"crossover_{int(x)}",
            state=ValveState.CLOSED,
        )
        registry[cv.valve_id] = cv
    return registry


def connecting_valve_map(registry: Mapping[str, Valve]) -> dict[float, str]:
    """Crossover coordinate -> connecting valve id."""
    return {
        v.position_x: v.valve_id
        for v in registry.values()
        if v.kind is ValveKind.CONNECTING
    }


def events_to_ndjson(events: Iterable[ValveEvent]) -> str:
    import json

    return "".join(
        json.dumps(e.to_record(), sort_keys=True, separators=(",", ":")) + "\n"
        for e in events
    )
