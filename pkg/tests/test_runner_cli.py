import json
import subprocess
import sys

import pytest

from gastwin.cli import main
from gastwin.domain import benchmark_scenario_path
from gastwin.errors import ScenarioValidationError
from gastwin.runner import ARTIFACT_NAMES, RunConfig, run


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench_run")
    result = run(RunConfig(scenario_path=benchmark_scenario_path(), out_dir=out))
    return result


class TestRun:
    def test_exit_ok_and_artifacts(self, bench_run):
        assert bench_run.exit_code == 0
        for name in ARTIFACT_NAMES:
            assert (bench_run.out_dir / name).is_file(), name
        for sid in (1, 2, 3):
            assert (bench_run.out_dir / f"table{sid}_comparison.csv").is_file()
            assert (bench_run.out_dir / f"field_section{sid}.csv").is_file()

    def test_t2_within_one_sample_period(self, bench_run):
        assert abs(bench_run.t2 - 420.0) <= 10.0

    def test_report_checks_pass(self, bench_run):
        report = json.loads((bench_run.out_dir / "run_report.json").read_text())
        assert report["ok"]
        assert report["checks"]["t1_continuity"] is True
        assert report["checks"]["opens_gated_by_allow"] is True

    def test_table1_a0_matches_snapshot(self, bench_run):
        lines = (bench_run.out_dir / "table1.csv").read_text().splitlines()
        assert lines[1].startswith("0,13.36,")
        assert lines[2].startswith("5,12.82,")
        assert lines[3].startswith("10,12.19,")

    def test_fig3_profiles_has_stationary_and_six_curves(self, bench_run):
        lines = (bench_run.out_dir / "fig3_profiles.csv").read_text().splitlines()
        assert lines[0] == "section,x_m,stationary_1e4pa,a0,a120,a240,a360,a480,a600"
        first = lines[1].split(",")
        assert first[0] == "1" and float(first[1]) == 0.0
        assert float(first[2]) == pytest.approx(14.0, abs=0.01)

    def test_same_config_identical_bytes(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            result = run(
                RunConfig(
                    scenario_path=benchmark_scenario_path(),
                    out_dir=tmp_path / sub,
                    seed=3,
                )
            )
            outs.append(
                {name: (result.out_dir / name).read_bytes() for name in ARTIFACT_NAMES}
            )
        assert outs[0] == outs[1]

    def test_invalid_scenario_raises_with_report(self, tmp_path):
        doc = json.loads(benchmark_scenario_path().read_text())
        doc["scenario"]["l1"] = doc["scenario"]["l3"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        with pytest.raises(ScenarioValidationError):
            run(RunConfig(scenario_path=bad, out_dir=tmp_path / "out"))
        report = json.loads((tmp_path / "out" / "run_report.json").read_text())
        assert report["valid"] is False
        assert report["violations"]


class TestCliVerbs:
    def test_validate_ok(self, capsys):
        assert main(["validate"]) == 0
        assert "valid" in capsys.readouterr().out

    def test_validate_bad_file(self, tmp_path, capsys):
        doc = json.loads(benchmark_scenario_path().read_text())
        doc["scenario"]["t1"] = -5.0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["validate", "--scenario", str(bad)]) == 1
        assert "t1" in capsys.readouterr().out

    def test_run_verb(self, tmp_path, capsys):
        code = main(["run", "--out", str(tmp_path), "--horizon", "460"])
        assert code == 0
        out = capsys.readouterr().out
        assert "t2=420.0" in out

    def test_tables_verb(self, tmp_path):
        assert main(["tables", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "table2_comparison.csv").is_file()

    def test_tables_empty_offsets(self, tmp_path):
        assert main(["tables", "--out", str(tmp_path), "--offsets", ""]) == 0
        assert (tmp_path / "table1.csv").read_text().strip() == "x_km"

    def test_locate_verb(self, tmp_path, capsys):
        series = tmp_path / "inlet.csv"
        series.write_text("t_s,pressure_pa\n300,133600\n420,145800\n")
        code = main([
            "locate", "--series", str(series), "--t", "420", "--t1", "300",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "Z   = 12200.0 Pa" in out
        assert "l1  = 8809.7 m" in out
        assert "snapped: 10000" in out
        assert "l3  = 18809.7 m" in out

    def test_locate_negative_rise_fails_explanatorily(self, tmp_path, capsys):
        series = tmp_path / "inlet.csv"
        series.write_text("t_s,pressure_pa\n300,133600\n420,120000\n")
        code = main([
            "locate", "--series", str(series), "--t", "420", "--t1", "300",
        ])
        assert code == 1
        assert "negative" in capsys.readouterr().err

    def test_locate_zero_rise_closed_form(self, tmp_path, capsys):
        series = tmp_path / "inlet.csv"
        series.write_text("t_s,pressure_pa\n300,133600\n420,133600\n")
        assert main(["locate", "--series", str(series), "--t", "420", "--t1", "300"]) == 0
        assert "l1  = 16677.5 m" in capsys.readouterr().out

    def test_console_script_entrypoint(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gastwin.cli", "validate"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0


class TestHttpTap:
    def test_sse_and_command_roundtrip(self, benchmark):
        import http.client
        import threading
        import time as _time

        from gastwin.stream import HttpTap
        from gastwin.world import World, WorldConfig

        spec, scenario = benchmark
        world = World(spec, scenario, WorldConfig(mode="operator_confirm", horizon=10.0))

        def sink(action, valve_id, operator_id):
            world.inject_operator_command(action, valve_id, operator_id)
            return None

        tap = HttpTap(world.bus, sink, known_valves=set(world.registry))
        host, port = tap.serve(port=0)
        try:
            got = []

            def reader():
                conn = http.client.HTTPConnection(host, port, timeout=5)
                conn.request("GET", "/stream")
                resp = conn.getresponse()
                while len(got) < 1:
                    line = resp.fp.readline().decode("utf-8")
                    if line.startswith("data: "):
                        got.append(json.loads(line[6:]))
                conn.close()

            thread = threading.Thread(target=reader, daemon=True)
            thread.start()
            _time.sleep(0.1)
            world.tick()  # publishes the t=0 sensor burst
            thread.join(timeout=5)
            assert got and got[0]["kind"] == "pressure_sample"

            conn = http.client.HTTPConnection(host, port, timeout=5)
            body = json.dumps({
                "kind": "command",
                "payload": {"action": "open", "valve_id": "cv-x10000",
                            "operator_id": "op-web"},
            })
            conn.request("POST", "/command", body)
            resp = conn.getresponse()
            assert resp.status == 200
            assert json.loads(resp.read())["kind"] == "ack"

            conn.request("POST", "/command", json.dumps({
                "kind": "command",
                "payload": {"action": "open", "valve_id": "nope", "operator_id": "x"},
            }))
            resp = conn.getresponse()
            assert resp.status == 400
            conn.close()
        finally:
            tap.close()
