"""Deterministic single-threaded world stepping.

Tick order is fixed: external command ingress, sensor sampling (with bus
delivery), valve automation, center decision, then command application whose
effects land next tick. The damaged line runs three regimes: stationary at
t = 0, a linear-in-time blend from the stationary profile to the measured
closure field until the valves actually shut, then the three isolated
section transients. The blend is non-physical scaffolding standing in for
the unmodeled rupture transient; everything after closure is the real model.
"""

from __future__ import annotations

import dataclasses
import queue
from dataclasses import dataclass, field

import numpy as np

from .bus import (
    SensorConfig,
    TelemetryBus,
    default_sensor_configs,
    make_message,
    sample_sensors,
    valve_position_message,
)
from .center import CenterConfig, ControlCenter, center_subscription_kinds
from .domain import (
    GasLineSpec,
    LeakScenario,
    PressureSnapshot,
    crossover_positions,
    sensor_sites,
    stationary_pressure,
)
from .errors import ConfigurationError
from .transient import SectionModels, TransientParams
from .valves import (
    ApplyResult,
    EventCause,
    Valve,
    ValveCommand,
    ValveEvent,
    ValveKind,
    ValveState,
    apply_command,
    build_benchmark_registry,
    connecting_valve_map,
    propagate_pairing,
    step_valve,
)

HEALTHY_LINE = "line_1"
DAMAGED_LINE = "line_2"

RATE_WINDOW_TICKS_SLACK = 2


@dataclass
class WorldConfig:
    dt: float = 1.0
    horizon: float | None = None  # defaults to t1 + 600 s
    seed: int = 0
    mode: str = "automatic"  # center mode
    reference_mode: str = "damaged_t1"
    pairing_latency_s: float = 1.0
    command_latency_s: float = 1.0
    localization_delay_s: float = 120.0
    noise_sigma: float = 0.0
    sample_period: float = 10.0
    trigger_mode: str = "scripted"  # "scripted" | "drop_rate"
    drop_rate_threshold: float | None = None  # Pa/s; None = valve default

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.trigger_mode not in ("scripted", "drop_rate"):
            raise ConfigurationError(f"unknown trigger_mode {self.trigger_mode!r}")


class World:
    """One simulated run of the parallel pair plus its control path."""

    def __init__(self, spec: GasLineSpec, scenario: LeakScenario, config: WorldConfig):
        self.spec = spec
        self.scenario = scenario
        self.config = config
        self.t = 0.0
        self.horizon = config.horizon if config.horizon is not None else scenario.t1 + 600.0
        self.rng = np.random.default_rng(config.seed)

        self.bus = TelemetryBus()
        registry_kwargs = {}
        if config.drop_rate_threshold is not None:
            registry_kwargs["threshold"] = config.drop_rate_threshold
        self.registry: dict[str, Valve] = build_benchmark_registry(
            scenario.l1, scenario.l3,
            damaged_line=DAMAGED_LINE, healthy_line=HEALTHY_LINE, **registry_kwargs,
        )
        # connecting valves exist at every crossover, not just the pair
        # bracketing this scenario's leak
        for x in crossover_positions(spec):
            vid = f"cv-x{int(x)}"
            if vid not in self.registry:
                self.registry[vid] = Valve(
                    valve_id=vid,
                    kind=ValveKind.CONNECTING,
                    position_x=x,
                    line_id=f"crossover_{int(x)}",
                    state=ValveState.CLOSED,
                )
        self.sensors: list[SensorConfig] = default_sensor_configs(
            sensor_sites(spec),
            (HEALTHY_LINE, DAMAGED_LINE),
            sample_period=config.sample_period,
            noise_sigma=config.noise_sigma,
        )
        self.center = ControlCenter(
            CenterConfig(
                spec=spec,
                line_ids=(HEALTHY_LINE, DAMAGED_LINE),
                shutoff_lines={
                    v.valve_id: v.line_id
                    for v in self.registry.values()
                    if v.kind is ValveKind.SHUTOFF
                },
                crossover_valves={
                    round(x, 6): vid for x, vid in connecting_valve_map(self.registry).items()
                },
                mode=config.mode,
                localization_delay_s=config.localization_delay_s,
                reference_mode=config.reference_mode,
                command_latency_s=config.command_latency_s,
            )
        )
        self._center_sub = self.bus.subscribe(kinds=center_subscription_kinds())

        self.events: list[ValveEvent] = []
        self.rejections: list[dict] = []
        self._pending: list[ValveCommand] = []
        self.external_commands: "queue.Queue[dict]" = queue.Queue()
        self._windows: dict[str, list[tuple[float, float]]] = {
            v.valve_id: [] for v in self.registry.values() if v.kind is ValveKind.SHUTOFF
        }
        self._scripted_fired = False
        self.closure_time: float | None = None
        self.models: SectionModels | None = None

    # --- field views --------------------------------------------------------

    def _blend_weight(self, t: float) -> float:
        return min(t / self.scenario.t1, 1.0)

    def _pre_closure_pressure(self, x: float, t: float) -> float:
        w = self._blend_weight(t)
        return (1.0 - w) * stationary_pressure(self.spec, x) + w * float(
            self.scenario.snapshot.interp(x)
        )

    def pressure_at(self, line_id: str, x: float, t: float) -> float:
        """Model pressure seen by a sensor tap at (line, x) at time t."""
        if line_id == HEALTHY_LINE:
            return stationary_pressure(self.spec, x)
        if self.models is None or t < (self.closure_time or float("inf")):
            return self._pre_closure_pressure(x, t)
        m = self.models
        if x <= self.scenario.l1 + 1e-9:
            return m.pressure(1, min(x, self.scenario.l1), t)
        if x < self.scenario.l3 - 1e-9:
            return m.pressure(2, x, t)
        return m.pressure(3, max(x, self.scenario.l3), t)

    # --- closure ------------------------------------------------------------

    def _closure_snapshot(self, t_c: float) -> PressureSnapshot:
        xs = self.scenario.snapshot.xs()
        ps = np.array([self._pre_closure_pressure(float(x), t_c) for x in xs])
        return PressureSnapshot(samples=tuple((float(x), float(p)) for x, p in zip(xs, ps)))

    def _build_sections(self, t_c: float) -> None:
        snap = self._closure_snapshot(t_c)
        params = TransientParams(
            l1=self.scenario.l1,
            l2=self.scenario.l2,
            l3=self.scenario.l3,
            length_L=self.spec.length_L,
            t1=t_c,
            sound_speed_c=self.spec.sound_speed_c,
            friction_2a=self.spec.friction_2a,
        )
        self.models = SectionModels(
            params=params,
            snapshot=snap,
            G0=self.spec.inlet_flow_G0,
            Gleak=self.scenario.leak_outflow_Gleak,
            Gout=self.scenario.outlet_draw_Gout,
        )
        self.closure_time = t_c

    def _commit_event(self, event: ValveEvent) -> None:
        valve = self.registry[event.valve_id]
        self.registry[event.valve_id] = dataclasses.replace(valve, state=event.to_state)
        self.events.append(event)
        self.bus.publish(
            valve_position_message(
                event.time_s, event.valve_id, event.to_state.value, event.cause.value
            )
        )
        if event.to_state is ValveState.CLOSED:
            self._pending.extend(
                propagate_pairing(
                    event, self.registry, pairing_latency_s=self.config.pairing_latency_s
                )
            )
            if (
                self.models is None
                and valve.kind is ValveKind.SHUTOFF
                and valve.line_id == DAMAGED_LINE
            ):
                self._build_sections(event.time_s)

    # --- tick stages ----------------------------------------------------------

    def _ingress_external(self, t: float) -> None:
        while True:
            try:
                payload = self.external_commands.get_nowait()
            except queue.Empty:
                return
            self.bus.publish(
                make_message(
                    "command",
                    t,
                    f"operator-{payload.get('operator_id', 'anon')}",
                    payload={
                        "action": payload["action"],
                        "valve_id": payload["valve_id"],
                        "operator_id": payload.get("operator_id", "anon"),
                    },
                )
            )

    def inject_operator_command(self, action: str, valve_id: str, operator_id: str) -> None:
        """Thread-safe operator command ingress; takes effect next tick."""
        self.external_commands.put(
            {"action": action, "valve_id": valve_id, "operator_id": operator_id}
        )

    def _sample_stage(self, t: float) -> None:
        for msg in sample_sensors(
            self.pressure_at, t, self.sensors, self.rng, length_L=self.spec.length_L
        ):
            self.bus.publish(msg)

    def _valve_stage(self, t: float) -> None:
        events: list[ValveEvent] = []
        if (
            self.config.trigger_mode == "scripted"
            and not self._scripted_fired
            and t >= self.scenario.t1
        ):
            left_id = f"sv-{DAMAGED_LINE}-{int(self.scenario.l1)}"
            left = self.registry[left_id]
            if left.state is ValveState.OPEN:
                events.append(
                    ValveEvent(t, left_id, EventCause.DROP_RATE_TRIGGER,
                               ValveState.OPEN, ValveState.CLOSED)
                )
            self._scripted_fired = True
        for valve_id in sorted(self._windows):
            valve = self.registry[valve_id]
            window = self._windows[valve_id]
            window.append((t, self.pressure_at(valve.line_id, valve.position_x, t)))
            max_len = int(60.0 / self.config.dt) + RATE_WINDOW_TICKS_SLACK
            if len(window) > max_len:
                del window[: len(window) - max_len]
            if self.config.trigger_mode == "drop_rate":
                events.extend(step_valve(valve, window, self.config.dt))
        for event in events:
            if self.registry[event.valve_id].state is ValveState.OPEN:
                self._commit_event(event)

    def _center_stage(self, t: float) -> None:
        for msg in self._center_sub.drain():
            self.center.ingest(msg)
        n_before = len(self.center.journal)
        commands = self.center.decide(t)
        self._pending.extend(commands)
        # surface new decisions on the bus for the stream/console
        for rec in self.center.journal[n_before:]:
            record = rec.to_record()
            self.bus.publish(
                make_message("journal", t, "control_center", payload=record)
            )
            if "verdict" in rec.computed:
                est = self.center.estimate
                payload = dict(rec.computed)
                if est is not None:
                    payload.update(
                        {
                            "Z_pa": est.Z,
                            "Z1": est.Z1,
                            "l1_raw_m": est.l1_hat,
                            "l1_snapped_m": est.l1_snapped,
                            "l3_snapped_m": est.l3_snapped,
                            "valve_ids": [
                                self.center.config.crossover_valves.get(round(x, 6))
                                for x in (est.l1_snapped, est.l3_snapped)
                            ],
                        }
                    )
                self.bus.publish(
                    make_message("verdict", t, "control_center", payload=payload)
                )

    def _apply_stage(self, t: float) -> None:
        due = [c for c in self._pending if c.apply_at_s <= t + 1e-9]
        self._pending = [c for c in self._pending if c.apply_at_s > t + 1e-9]
        for cmd in sorted(due, key=lambda c: (c.apply_at_s, c.valve_id, c.action)):
            valve = self.registry.get(cmd.valve_id)
            if valve is None:
                self.rejections.append({"time_s": t, "command": cmd.valve_id, "reason": "unknown valve"})
                continue
            result: ApplyResult = apply_command(valve, cmd, t)
            if result.event is not None:
                self._commit_event(result.event)
            else:
                self.rejections.append(
                    {"time_s": t, "command": cmd.valve_id, "reason": result.rejection}
                )

    def tick(self) -> None:
        t = self.t
        self._ingress_external(t)
        self._sample_stage(t)
        self._valve_stage(t)
        self._center_stage(t)
        self._apply_stage(t)
        self.t = round(self.t + self.config.dt, 9)

    def run(self, on_tick=None) -> None:
        while self.t <= self.horizon + 1e-9:
            self.tick()
            if on_tick is not None:
                on_tick(self)

    # --- exports ----------------------------------------------------------

    def sorted_events(self) -> list[ValveEvent]:
        return sorted(self.events, key=lambda e: e.sort_key())

    def events_ndjson(self) -> str:
        from .valves import events_to_ndjson

        return events_to_ndjson(self.sorted_events())

    def journal_ndjson(self) -> str:
        return self.center.export_journal()
