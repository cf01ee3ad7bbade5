"""End-to-end run orchestration and artifact export.

A run loads one scenario, steps the world across its horizon, and writes a
fixed artifact set under the output directory: the three section tables and
their reference comparisons, the full-length profile curves, per-section
field grids, the valve event log, the center journal, and a self-report.
All artifacts are a pure function of (scenario, config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import GasLineSpec, load_scenario, stationary_pressure, validate_scenario
from .errors import ScenarioValidationError
from .transient import (
    SectionModels,
    TABLE_OFFSETS,
    comparison_csv,
    emit_table,
    load_reference_tables,
)
from .world import World, WorldConfig

ARTIFACT_NAMES = (
    "table1.csv",
    "table2.csv",
    "table3.csv",
    "fig3_profiles.csv",
    "events.ndjson",
    "journal.ndjson",
)


@dataclass
class RunConfig:
    """One run request: scenario, stepping, mode, and output placement."""

    scenario_path: Path
    out_dir: Path
    dt: float = 1.0
    horizon: float | None = None
    seed: int = 0
    mode: str = "automatic"
    reference_mode: str = "damaged_t1"
    noise_sigma: float = 0.0
    trigger_mode: str = "scripted"
    pairing_latency_s: float = 1.0
    localization_delay_s: float = 120.0
    table_offsets: tuple[float, ...] = TABLE_OFFSETS


@dataclass
class RunResult:
    out_dir: Path
    world: World
    report: dict
    exit_code: int

    @property
    def t2(self) -> float | None:
        return self.world.center.t2


def write_fig3_profiles(
    spec: GasLineSpec,
    models: SectionModels,
    path: Path,
    offsets: tuple[float, ...] = TABLE_OFFSETS,
    dx: float = 100.0,
) -> None:
    """Stationary profile plus the post-closure curves, section by section."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        cols = ",".join(f"a{int(a)}" for a in offsets)
        fh.write(f"section,x_m,stationary_1e4pa,{cols}\n")
        for sid in (1, 2, 3):
            a, b = models.params.section_bounds(sid)
            xs = np.arange(a, b + dx / 2, dx)
            ts = np.array([models.params.t1 + off for off in offsets])
            fld = models.field(sid, xs, ts)
            for j, x in enumerate(xs):
                stat = stationary_pressure(spec, float(x)) / 1e4
                vals = ",".join(f"{fld.values[i, j] / 1e4:.4f}" for i in range(len(ts)))
                fh.write(f"{sid},{x:.1f},{stat:.4f},{vals}\n")


def export_tables(
    models: SectionModels, out_dir: Path, offsets: tuple[float, ...] = TABLE_OFFSETS
) -> dict[int, "object"]:
    """Write table{1,2,3}.csv plus reference comparisons; returns the tables."""
    refs = load_reference_tables()
    tables = {}
    for sid in (1, 2, 3):
        table = emit_table(models, sid, offsets)
        table.to_csv(out_dir / f"table{sid}.csv")
        if sid in refs and list(offsets) == refs[sid].offsets_s and table.xs_m == refs[sid].xs_m:
            comparison_csv(table, refs[sid], out_dir / f"table{sid}_comparison.csv")
        tables[sid] = table
    return tables


def _table_trend_checks(tables: dict) -> list[str]:
    problems = []
    t1v = tables[1].values_pa
    if not np.all(np.diff(t1v, axis=1) > 0):
        problems.append("section 1 not strictly increasing in t")
    if not np.all(np.diff(t1v, axis=0) < 0):
        problems.append("section 1 not strictly decreasing in x")
    for sid in (2, 3):
        if not np.all(np.diff(tables[sid].values_pa, axis=1) < 0):
            problems.append(f"section {sid} not strictly decreasing in t")
    return problems


def run(config: RunConfig) -> RunResult:
    """Execute one full run; artifacts land under config.out_dir."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec, scenario = load_scenario(config.scenario_path)
    except ScenarioValidationError as exc:
        report = {"valid": False, "violations": exc.violations}
        (out / "run_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        raise

    world = World(
        spec,
        scenario,
        WorldConfig(
            dt=config.dt,
            horizon=config.horizon,
            seed=config.seed,
            mode=config.mode,
            reference_mode=config.reference_mode,
            noise_sigma=config.noise_sigma,
            trigger_mode=config.trigger_mode,
            pairing_latency_s=config.pairing_latency_s,
            localization_delay_s=config.localization_delay_s,
        ),
    )
    world.run()

    models = SectionModels.from_scenario(spec, scenario)
    tables = export_tables(models, out, config.table_offsets)
    write_fig3_profiles(spec, models, out / "fig3_profiles.csv", config.table_offsets)
    for sid in (1, 2, 3):
        a, b = models.params.section_bounds(sid)
        xs = np.arange(a, b + 50.0, 100.0)
        ts = scenario.t1 + np.arange(0.0, 601.0, 10.0)
        models.field(sid, xs, ts).to_csv(out / f"field_section{sid}.csv")
    (out / "events.ndjson").write_text(world.events_ndjson(), encoding="utf-8")
    (out / "journal.ndjson").write_text(world.journal_ndjson(), encoding="utf-8")

    report = _self_report(spec, scenario, world, tables)
    (out / "run_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    exit_code = 0 if report["ok"] else 1
    return RunResult(out_dir=out, world=world, report=report, exit_code=exit_code)


def _self_report(spec, scenario, world: World, tables) -> dict:
    checks: dict[str, bool | str] = {}
    violations = validate_scenario(spec, scenario)
    checks["scenario_valid"] = not violations

    # t1 continuity: the a=0 table column must equal the closure field
    cont = True
    if world.models is not None:
        snap = world.models.snapshot
        for sid in (1, 2, 3):
            for x, v in zip(tables[sid].xs_m, tables[sid].values_pa[:, 0]):
                if abs(v - float(scenario.snapshot.interp(x))) > 1e-6:
                    cont = False
    checks["t1_continuity"] = cont

    trend_problems = _table_trend_checks(tables)
    checks["table_trends"] = not trend_problems

    # every connecting-valve open in the journal carries a same-step ALLOW
    gated = True
    for rec in world.center.journal:
        opens = [c for c in rec.commands if c.get("action") == "open"]
        if opens and rec.computed.get("verdict") != "ALLOW":
            gated = False
    checks["opens_gated_by_allow"] = gated

    ok = all(v is True for v in checks.values())
    return {
        "ok": ok,
        "checks": checks,
        "trend_problems": trend_problems,
        "violations": violations,
        "t2_s": world.center.t2,
        "phase": world.center.phase.value,
        "closure_time_s": world.closure_time,
        "rejections": world.rejections,
        "estimate": None
        if world.center.estimate is None
        else {
            "Z_pa": world.center.estimate.Z,
            "l1_raw_m": world.center.estimate.l1_hat,
            "l1_snapped_m": world.center.estimate.l1_snapped,
            "l3_snapped_m": world.center.estimate.l3_snapped,
        },
    }
