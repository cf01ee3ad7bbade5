"""Control-center decision pipeline.

Consumes telemetry only: pressure samples from the line ends and crossover
sites, valve-position reports, and (in operator_confirm mode) operator
commands. From those alone it detects the closure, solves for the isolated
section's crossovers, monitors the activation guard, and issues or authorizes
the connecting-valve open commands at t2. Every phase change and every guard
evaluation lands in an append-only journal; the journal is a pure function of
the ingested message sequence, so replaying a captured stream through a fresh
center reproduces it byte for byte.

The center is deliberately blind to the ground-truth scenario: it is
constructed from passport constants and the asset registry only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .domain import GasLineSpec
from .localization import (
    LocalizationEstimate,
    check_activation,
    detect_closure_signature,
    estimate_sections,
)
from .valves import EventCause, ValveCommand


class Phase(str, Enum):
    STATIONARY = "stationary"
    LEAK_SUSPECTED = "leak_suspected"
    VALVES_CLOSED_DETECTED = "valves_closed_detected"
    LOCALIZED = "localized"
    AWAITING_CONDITION = "awaiting_condition"
    ACTIVATED = "activated"
    REPAIRED = "repaired"


_PHASE_ORDER = list(Phase)


@dataclass(frozen=True)
class CenterConfig:
    """Passport-derived configuration; carries no scenario ground truth."""

    spec: GasLineSpec
    line_ids: tuple[str, str] = ("line_1", "line_2")
    shutoff_lines: Mapping[str, str] = field(default_factory=dict)  # valve id -> line
    crossover_valves: Mapping[float, str] = field(default_factory=dict)  # x -> valve id
    mode: str = "automatic"  # "automatic" | "operator_confirm"
    eps_max: float = 1.3
    localization_delay_s: float = 120.0
    confirmation_samples: int = 2
    reference_mode: str = "damaged_t1"  # or "healthy_live"
    command_latency_s: float = 1.0

    def __post_init__(self):
        if self.mode not in ("automatic", "operator_confirm"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.reference_mode not in ("damaged_t1", "healthy_live"):
            raise ValueError(f"unknown reference_mode {self.reference_mode!r}")


@dataclass
class JournalRecord:
    """One appended decision-journal entry."""

    time_s: float
    phase_before: str
    phase_after: str
    trigger_seq: int | None = None
    computed: dict = field(default_factory=dict)
    commands: list[dict] = field(default_factory=list)
    note: str | None = None

    def to_record(self) -> dict:
        return {
            "time_s": self.time_s,
            "phase_before": self.phase_before,
            "phase_after": self.phase_after,
            "trigger_seq": self.trigger_seq,
            "computed": self.computed,
            "commands": self.commands,
            "note": self.note,
        }


class ControlCenter:
    """Stateful fold over the telemetry stream."""

    def __init__(self, config: CenterConfig):
        self.config = config
        self.phase = Phase.STATIONARY
        self.mode = config.mode
        self.t2: float | None = None
        self.estimate: LocalizationEstimate | None = None
        self.damaged_line: str | None = None
        self.closure_time: float | None = None
        self.journal: list[JournalRecord] = []
        self._series: dict[tuple[str, float], list[tuple[float, float]]] = {}
        self._last_seen: dict[str, float] = {}
        self._last_seq: int | None = None
        self._last_condition_sample: float | None = None
        self._pending_operator: list[dict] = []
        self._closed_valves: set[str] = set()

    # --- series helpers -------------------------------------------------

    def _append_sample(self, line: str, x: float, t: float, p: float) -> None:
        self._series.setdefault((line, round(x, 6)), []).append((t, p))

    def _latest(self, line: str, x: float) -> tuple[float, float] | None:
        s = self._series.get((line, round(x, 6)))
        return s[-1] if s else None

    def _value_at_or_before(self, line: str, x: float, t: float) -> float | None:
        s = self._series.get((line, round(x, 6)))
        if not s:
            return None
        best = None
        for ts, ps in s:
            if ts <= t + 1e-9:
                best = ps
            else:
                break
        return best

    # --- journal ----------------------------------------------------------

    def _record(
        self,
        time_s: float,
        after: Phase | None = None,
        computed: dict | None = None,
        commands: list[dict] | None = None,
        note: str | None = None,
    ) -> JournalRecord:
        before = self.phase
        if after is not None:
            self.phase = after
        rec = JournalRecord(
            time_s=time_s,
            phase_before=before.value,
            phase_after=self.phase.value,
            trigger_seq=self._last_seq,
            computed=computed or {},
            commands=commands or [],
            note=note,
        )
        self.journal.append(rec)
        return rec

    # --- ingest -----------------------------------------------------------

    def ingest(self, msg: dict) -> None:
        """Fold one schema-valid telemetry message into the center state."""
        source = msg["source"]
        t = msg["time_s"]
        if source in self._last_seen and t < self._last_seen[source] - 1e-9:
            self._record(t, note=f"stale message from {source} dropped")
            return
        self._last_seen[source] = t
        self._last_seq = msg.get("seq", self._last_seq)

        kind = msg["kind"]
        if kind == "pressure_sample":
            self._append_sample(msg["payload"]["line_id"], msg["x_m"], t, msg["pressure_pa"])
        elif kind == "valve_position":
            valve_id = msg["payload"]["valve_id"]
            if msg["valve_state"] == "closed" and valve_id in self.config.shutoff_lines:
                self._closed_valves.add(valve_id)
                if self.phase in (Phase.STATIONARY, Phase.LEAK_SUSPECTED):
                    self.damaged_line = self.config.shutoff_lines[valve_id]
                    self.closure_time = t
                    self._record(
                        t,
                        after=Phase.VALVES_CLOSED_DETECTED,
                        computed={"closure_valve": valve_id, "t_closure": t},
                    )
        elif kind == "command" and msg["payload"].get("operator_id"):
            self._pending_operator.append(msg)

    # --- decide -----------------------------------------------------------

    def decide(self, now: float) -> list[ValveCommand]:
        """Run one decision step; returns valve commands to enqueue."""
        operator_msgs = self._pending_operator
        self._pending_operator = []
        if self.phase in (Phase.STATIONARY, Phase.LEAK_SUSPECTED):
            self._watch_for_closure(now)
        if self.phase is Phase.VALVES_CLOSED_DETECTED:
            self._try_localize()
        if self.phase is Phase.AWAITING_CONDITION:
            return self._monitor_condition(now, operator_msgs)
        for msg in operator_msgs:
            self._record(
                now,
                note=f"operator command for {msg['payload']['valve_id']} rejected: "
                     "no ALLOW verdict outstanding",
            )
        return []

    # The closure signature needs both end sensors of one line; before any
    # valve-position report arrives it is the only closure indicator.
    def _watch_for_closure(self, now: float) -> None:
        spec = self.config.spec
        for line in self.config.line_ids:
            inlet = self._series.get((line, 0.0))
            outlet = self._series.get((line, round(spec.length_L, 6)))
            if not inlet or not outlet:
                continue
            times = [t for t, _ in inlet]
            out_by_t = dict(outlet)
            paired = [(t, p, out_by_t.get(t)) for t, p in inlet if t in out_by_t]
            if not paired:
                continue
            det = detect_closure_signature(
                [t for t, _, _ in paired],
                [p for _, p, _ in paired],
                [o for _, _, o in paired],
                spec.inlet_pressure_P1,
                spec.outlet_pressure_P2,
                confirmation_samples=self.config.confirmation_samples,
            )
            if det is not None:
                self.damaged_line = line
                self.closure_time = det
                self._record(
                    det,
                    after=Phase.VALVES_CLOSED_DETECTED,
                    computed={"t_closure": det, "signature": "end_pressure_divergence"},
                )
                return
            if self.phase is Phase.STATIONARY:
                below = [
                    (t, p)
                    for t, p in outlet
                    if p < spec.outlet_pressure_P2
                ]
                if len(below) >= self.config.confirmation_samples:
                    self._record(below[self.config.confirmation_samples - 1][0],
                                 after=Phase.LEAK_SUSPECTED,
                                 computed={"line": line})

    def _try_localize(self) -> None:
        if self.damaged_line is None or self.closure_time is None:
            return
        latest = self._latest(self.damaged_line, 0.0)
        if latest is None:
            return
        t_sample, p_now = latest
        if t_sample < self.closure_time + self.config.localization_delay_s - 1e-9:
            return
        p_t1 = self._value_at_or_before(self.damaged_line, 0.0, self.closure_time)
        if p_t1 is None:
            self._record(t_sample, note="no inlet baseline at closure time")
            return
        if p_now < p_t1:
            self._record(
                t_sample,
                note=f"inlet rise negative (Z={p_now - p_t1:.1f} Pa); localization deferred",
            )
            return
        est = estimate_sections(p_now, p_t1, t_sample, self.closure_time, self.config.spec)
        self.estimate = est
        computed = {
            "Z_pa": est.Z,
            "Z1": est.Z1,
            "l1_raw_m": est.l1_hat,
            "l1_snapped_m": est.l1_snapped,
            "l3_raw_m": est.l3_hat,
            "l3_snapped_m": est.l3_snapped,
            "residual": est.residual,
        }
        self._record(t_sample, after=Phase.LOCALIZED, computed=computed)
        self._record(t_sample, after=Phase.AWAITING_CONDITION)

    def _condition_inputs(self, now: float) -> tuple[float, float, float, float] | None:
        assert self.estimate is not None and self.damaged_line is not None
        x1 = self.estimate.l1_snapped
        inlet = self._latest(self.damaged_line, 0.0)
        damaged = self._latest(self.damaged_line, x1)
        if inlet is None or damaged is None:
            return None
        if self.config.reference_mode == "damaged_t1":
            ref = self._value_at_or_before(self.damaged_line, x1, self.closure_time or 0.0)
        else:
            healthy = [l for l in self.config.line_ids if l != self.damaged_line][0]
            latest_ref = self._latest(healthy, x1)
            ref = latest_ref[1] if latest_ref else None
        if ref is None:
            return None
        sample_time = max(inlet[0], damaged[0])
        return sample_time, inlet[1], damaged[1], ref

    def _monitor_condition(self, now: float, operator_msgs: list[dict]) -> list[ValveCommand]:
        inputs = self._condition_inputs(now)
        if inputs is None:
            return []
        sample_time, p0_now, p_damaged, p_ref = inputs
        if self._last_condition_sample is not None and sample_time <= self._last_condition_sample:
            if not operator_msgs:
                return []
        self._last_condition_sample = sample_time
        verdict = check_activation(
            p0_now,
            self.config.spec.inlet_pressure_P1,
            p_damaged,
            p_ref,
            self.config.eps_max,
        )
        computed = {
            "verdict": verdict.label,
            "inlet_ratio": verdict.inlet_ratio,
            "eps_max": verdict.eps_max,
            "p_damaged_pa": p_damaged,
            "p_reference_pa": p_ref,
            "p_inlet_pa": p0_now,
        }
        if not verdict.allow:
            self._record(sample_time, computed=computed, note="activation denied")
            for msg in operator_msgs:
                self._record(
                    now,
                    note=f"operator command for {msg['payload']['valve_id']} rejected: "
                         "activation condition not met",
                )
            return []
        if self.mode == "automatic":
            for msg in operator_msgs:
                self._record(now, note="operator command ignored in automatic mode")
            commands = self._open_commands(now, EventCause.CONTROL_CENTER_COMMAND, None)
            self.t2 = now
            self._record(
                now,
                after=Phase.ACTIVATED,
                computed={**computed, "t2_s": now},
                commands=[c.__dict__ | {"cause": c.cause.value} for c in commands],
            )
            return commands
        # operator_confirm: surface the verdict, then act only on an
        # operator command that follows an ALLOW.
        self._record(sample_time, computed=computed, note="awaiting operator")
        commands: list[ValveCommand] = []
        for msg in operator_msgs:
            payload = msg["payload"]
            target = payload["valve_id"]
            expected = {self.config.crossover_valves.get(round(x, 6)) for x in (
                self.estimate.l1_snapped, self.estimate.l3_snapped)}
            if payload["action"] != "open" or target not in expected:
                self._record(now, note=f"operator command for {target} rejected")
                continue
            commands.extend(
                self._open_commands(now, EventCause.OPERATOR_COMMAND, payload["operator_id"])
            )
            self.t2 = now
            self._record(
                now,
                after=Phase.ACTIVATED,
                computed={**computed, "t2_s": now, "operator_id": payload["operator_id"]},
                commands=[c.__dict__ | {"cause": c.cause.value} for c in commands],
            )
            break
        return commands

    def _open_commands(
        self, now: float, cause: EventCause, operator_id: str | None
    ) -> list[ValveCommand]:
        assert self.estimate is not None
        commands = []
        for x in (self.estimate.l1_snapped, self.estimate.l3_snapped):
            valve_id = self.config.crossover_valves.get(round(x, 6))
            if valve_id is None:
                self._record(now, note=f"no connecting valve known at x={x}")
                continue
            commands.append(
                ValveCommand(
                    valve_id=valve_id,
                    action="open",
                    cause=cause,
                    issued_at_s=now,
                    apply_at_s=now + self.config.command_latency_s,
                    operator_id=operator_id,
                )
            )
        return commands

    # --- export / replay ---------------------------------------------------

    def export_journal(self) -> str:
        """NDJSON journal text (stable key order)."""
        return "".join(
            json.dumps(rec.to_record(), sort_keys=True, separators=(",", ":")) + "\n"
            for rec in self.journal
        )

    @classmethod
    def replay(cls, config: CenterConfig, messages: Iterable[dict]) -> "ControlCenter":
        """Feed a captured message sequence through a fresh center.

        Messages are grouped by time stamp; one decide step runs per group,
        mirroring the live per-tick cadence.
        """
        center = cls(config)
        group_time: float | None = None
        for msg in messages:
            t = msg["time_s"]
            if group_time is not None and t > group_time:
                center.decide(group_time)
            group_time = t if group_time is None or t > group_time else group_time
            center.ingest(msg)
        if group_time is not None:
            center.decide(group_time)
        return center


def center_subscription_kinds() -> set[str]:
    return {"pressure_sample", "valve_position", "command"}
