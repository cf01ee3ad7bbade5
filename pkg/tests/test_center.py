import pytest

from gastwin.bus import make_message
from gastwin.center import CenterConfig, ControlCenter, Phase
from gastwin.domain import GasLineSpec

SPEC = GasLineSpec(3e4, 0.5, 14e4, 11e4, 10.0, 1e4, 383.3, 0.1)


def config(mode="automatic", **kw) -> CenterConfig:
    return CenterConfig(
        spec=SPEC,
        shutoff_lines={"sv-line_2-10000": "line_2", "sv-line_2-20000": "line_2"},
        crossover_valves={10000.0: "cv-x10000", 20000.0: "cv-x20000"},
        mode=mode,
        **kw,
    )


def pressure_msg(t, x, p, line="line_2", seq=None):
    msg = make_message(
        "pressure_sample", t, f"ps-{line}-{int(x)}", x_m=float(x), pressure_pa=float(p),
        payload={"line_id": line},
    )
    if seq is not None:
        msg["seq"] = seq
    return msg


def valve_closed_msg(t, valve_id):
    return make_message(
        "valve_position", t, f"vpos-{valve_id}", valve_state="closed",
        payload={"valve_id": valve_id},
    )


def operator_msg(t, valve_id, action="open", operator="op7"):
    return make_message(
        "command", t, f"operator-{operator}",
        payload={"action": action, "valve_id": valve_id, "operator_id": operator},
    )


def drive_paper_story(center: ControlCenter, *, inject_operator_at: float | None = None):
    """Minimal telemetry reproducing the benchmark storyline."""
    t = 0.0
    # closure at t=300; localization delay 120 -> estimate at t=420
    while t <= 600.0:
        if t < 300.0:
            inlet = 13.36e4
            p_l1 = 12.19e4
            outlet = 10.4e4
        else:
            dt = t - 300.0
            inlet = 13.36e4 + 128.0 * dt  # Z(120) = 1.536e4: rise past nominal
            p_l1 = 12.19e4 + 180.0 * dt
            outlet = 10.4e4 - 60.0 * dt
        center.ingest(pressure_msg(t, 0, inlet))
        center.ingest(pressure_msg(t, 10000, p_l1))
        center.ingest(pressure_msg(t, 30000, outlet))
        center.ingest(pressure_msg(t, 0, 14e4, line="line_1"))
        center.ingest(pressure_msg(t, 10000, 13.08e4, line="line_1"))
        center.ingest(pressure_msg(t, 30000, 11e4, line="line_1"))
        if t == 300.0:
            center.ingest(valve_closed_msg(300.0, "sv-line_2-10000"))
            center.ingest(valve_closed_msg(300.0, "sv-line_2-20000"))
        if inject_operator_at is not None and t == inject_operator_at:
            center.ingest(operator_msg(t, "cv-x10000"))
        commands = center.decide(t)
        yield t, commands
        t += 10.0


class TestIngest:
    def test_sample_appends_series(self):
        center = ControlCenter(config())
        center.ingest(pressure_msg(0.0, 0, 14e4))
        assert center.phase is Phase.STATIONARY
        assert center._latest("line_2", 0.0) == (0.0, 14e4)

    def test_valve_closed_advances_phase(self):
        center = ControlCenter(config())
        center.ingest(valve_closed_msg(300.0, "sv-line_2-10000"))
        assert center.phase is Phase.VALVES_CLOSED_DETECTED
        assert center.closure_time == 300.0
        assert center.damaged_line == "line_2"

    def test_stale_message_dropped_and_journaled(self):
        center = ControlCenter(config())
        center.ingest(pressure_msg(10.0, 0, 14e4))
        center.ingest(pressure_msg(5.0, 0, 13e4))
        assert center._latest("line_2", 0.0) == (10.0, 14e4)
        assert any("stale" in (r.note or "") for r in center.journal)


class TestDecide:
    def test_stationary_no_commands(self):
        center = ControlCenter(config())
        center.ingest(pressure_msg(0.0, 0, 14e4))
        center.ingest(pressure_msg(0.0, 30000, 11e4))
        assert center.decide(0.0) == []
        assert center.phase is Phase.STATIONARY

    def test_automatic_full_story(self):
        center = ControlCenter(config())
        opens = []
        for t, commands in drive_paper_story(center):
            opens += [c for c in commands if c.action == "open"]
        assert center.phase is Phase.ACTIVATED
        assert center.t2 == 420.0  # t1 + localization delay
        assert {c.valve_id for c in opens} == {"cv-x10000", "cv-x20000"}
        assert center.estimate is not None
        assert center.estimate.l1_snapped == 10000.0
        assert center.estimate.l3_snapped == 20000.0

    def test_localization_uses_only_end_telemetry(self):
        # the center is constructed without any scenario object; feeding only
        # x=0 and x=L samples plus valve events still localizes
        center = ControlCenter(config())
        for t in range(0, 601, 10):
            tt = float(t)
            inlet = 13.36e4 if tt < 300 else 13.36e4 + 128.0 * (tt - 300.0)
            center.ingest(pressure_msg(tt, 0, inlet))
            center.ingest(pressure_msg(tt, 30000, 10.4e4))
            if tt == 300.0:
                center.ingest(valve_closed_msg(tt, "sv-line_2-10000"))
            center.decide(tt)
        assert center.estimate is not None
        assert center.estimate.Z == pytest.approx(128.0 * 120.0)

    def test_deny_journaled_no_commands(self):
        center = ControlCenter(config(eps_max=1.01))
        all_cmds = []
        for _, commands in drive_paper_story(center):
            all_cmds += commands
        assert all_cmds == []
        assert center.phase is Phase.AWAITING_CONDITION
        denies = [r for r in center.journal if r.computed.get("verdict") == "DENY"]
        assert denies
        assert all(not r.commands for r in denies)

    def test_negative_rise_stays_in_detected(self):
        center = ControlCenter(config())
        for t in range(0, 601, 10):
            tt = float(t)
            inlet = 13.36e4 - (40.0 * (tt - 300.0) if tt >= 300 else 0.0)
            center.ingest(pressure_msg(tt, 0, inlet))
            if tt == 300.0:
                center.ingest(valve_closed_msg(tt, "sv-line_2-10000"))
            center.decide(tt)
        assert center.phase is Phase.VALVES_CLOSED_DETECTED
        assert any("deferred" in (r.note or "") for r in center.journal)

    def test_signature_fallback_without_valve_messages(self):
        center = ControlCenter(config(localization_delay_s=60.0))
        for t in range(0, 501, 10):
            tt = float(t)
            inlet = 13.9e4 if tt < 100 else 14.1e4 + 100.0 * (tt - 100.0)
            outlet = 11.1e4 if tt < 100 else 10.9e4 - 40.0 * (tt - 100.0)
            center.ingest(pressure_msg(tt, 0, inlet))
            center.ingest(pressure_msg(tt, 30000, outlet))
            center.decide(tt)
        assert center.phase in (Phase.LOCALIZED, Phase.AWAITING_CONDITION, Phase.ACTIVATED)
        assert center.closure_time == 100.0


class TestOperatorConfirm:
    def test_waits_for_operator_then_activates(self):
        center = ControlCenter(config(mode="operator_confirm"))
        opens = []
        for t, commands in drive_paper_story(center, inject_operator_at=450.0):
            opens += [c for c in commands if c.action == "open"]
        assert center.phase is Phase.ACTIVATED
        assert center.t2 == 450.0
        assert {c.valve_id for c in opens} == {"cv-x10000", "cv-x20000"}
        assert all(c.operator_id == "op7" for c in opens)

    def test_no_operator_no_activation(self):
        center = ControlCenter(config(mode="operator_confirm"))
        all_cmds = []
        for _, commands in drive_paper_story(center):
            all_cmds += commands
        assert all_cmds == []
        assert center.phase is Phase.AWAITING_CONDITION
        assert center.t2 is None

    def test_operator_before_allow_rejected(self):
        center = ControlCenter(config(mode="operator_confirm"))
        center.ingest(operator_msg(50.0, "cv-x10000"))
        assert center.decide(50.0) == []
        assert any("rejected" in (r.note or "") for r in center.journal)

    def test_operator_command_for_wrong_valve_rejected(self):
        center = ControlCenter(config(mode="operator_confirm"))
        opens = []
        story = drive_paper_story(center, inject_operator_at=440.0)
        # swap in a command for a non-crossover valve
        for t, commands in story:
            if t == 430.0:
                center.ingest(operator_msg(430.0, "sv-line_2-10000"))
            opens += [c for c in commands if c.action == "open"]
        assert all(c.valve_id.startswith("cv-") for c in opens)


class TestJournalReplay:
    def test_replay_reproduces_journal_bytes(self):
        cfg = config()
        live = ControlCenter(cfg)
        captured = []

        def capture(msg, seq=[0]):
            seq[0] += 1
            m = dict(msg)
            m["seq"] = seq[0]
            captured.append(m)
            return m

        t = 0.0
        while t <= 600.0:
            batch = []
            inlet = 13.36e4 if t < 300 else 13.36e4 + 128.0 * (t - 300.0)
            batch.append(capture(pressure_msg(t, 0, inlet)))
            batch.append(capture(pressure_msg(t, 30000, 10.4e4)))
            if t == 300.0:
                batch.append(capture(valve_closed_msg(t, "sv-line_2-10000")))
            for m in batch:
                live.ingest(m)
            live.decide(t)
            t += 10.0

        replayed = ControlCenter.replay(cfg, captured)
        assert replayed.export_journal() == live.export_journal()
        assert replayed.t2 == live.t2

    def test_empty_run_empty_journal(self):
        center = ControlCenter(config())
        assert center.export_journal() == ""
