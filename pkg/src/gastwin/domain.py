"""Pipeline passport, leak scenarios, and the stationary regime.

All quantities are SI (Pa, m, s). The table-friendly 10^4 Pa convention used
in exported artifacts is a formatting concern handled by the exporters.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DomainBoundsError,
    InsufficientDataError,
    SchemaError,
    ScenarioValidationError,
)


@dataclass(frozen=True)
class GasLineSpec:
    """Passport constants of one line of the parallel pair.

    ``inlet_flow_G0`` is the linearized mass-flow variable in Pa*s/m; its
    physical normalization is treated as opaque. ``friction_2a`` stores the
    product 2a (1/s) that the transient model consumes directly. The
    connecting pipes are taken to have the same diameter as the line itself.
    """

    length_L: float
    diameter_d: float
    inlet_pressure_P1: float
    outlet_pressure_P2: float
    inlet_flow_G0: float
    crossover_spacing_l: float
    sound_speed_c: float
    friction_2a: float

    @property
    def diffusivity(self) -> float:
        """c^2 / 2a, the diffusivity of the linearized pressure dynamics."""
        return self.sound_speed_c**2 / self.friction_2a


@dataclass(frozen=True)
class PressureSnapshot:
    """Sampled pressure field P(x, t1) along one line at the closure instant.

    ``samples`` is an ordered tuple of (x_m, pressure_pa) pairs covering the
    whole line. Boundary gradients are one-sided estimates filled in by
    :func:`estimate_boundary_gradients`.
    """

    samples: tuple[tuple[float, float], ...]
    grad_inlet: float | None = None
    grad_outlet: float | None = None

    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.samples], dtype=float)

    def pressures(self) -> np.ndarray:
        return np.array([p for _, p in self.samples], dtype=float)

    def interp(self, x: float | np.ndarray) -> float | np.ndarray:
        """Piecewise-linear pressure at x (no extrapolation past the ends)."""
        return np.interp(x, self.xs(), self.pressures())

    def section_nodes(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Snapshot nodes restricted to [a, b], endpoints interpolated in."""
        xs, ps = self.xs(), self.pressures()
        keep = (xs > a) & (xs < b)
        nx = np.concatenate(([a], xs[keep], [b]))
        npp = np.concatenate(([float(np.interp(a, xs, ps))], ps[keep], [float(np.interp(b, xs, ps))]))
        return nx, npp


@dataclass(frozen=True)
class LeakScenario:
    """One emergency case: section bounds, leak point, flows, and the t1 field.

    ``l1`` and ``l3`` are the crossover/isolation-valve coordinates bracketing
    the leak at ``l2``; ``t1`` is the closure instant. The two flows are the
    constant leak outflow and consumer draw that drive the post-closure
    transients (Pa*s/m).
    """

    l1: float
    l2: float
    l3: float
    t1: float
    leak_outflow_Gleak: float
    outlet_draw_Gout: float
    snapshot: PressureSnapshot


def stationary_pressure(spec: GasLineSpec, x: float) -> float:
    """Pressure of the undamaged line at coordinate x in the stationary regime.

    Uses the isothermal square-root law P(x) = sqrt(P1^2 - (P1^2 - P2^2) x/L),
    which is exact at both ends and strictly decreasing in between.
    """
    if not 0.0 <= x <= spec.length_L:
        raise DomainBoundsError(f"x={x} outside [0, {spec.length_L}]")
    p1sq = spec.inlet_pressure_P1**2
    p2sq = spec.outlet_pressure_P2**2
    return math.sqrt(p1sq - (p1sq - p2sq) * x / spec.length_L)


def estimate_boundary_gradients(snapshot: PressureSnapshot) -> PressureSnapshot:
    """Fill grad_inlet/grad_outlet with one-sided finite differences.

    grad_inlet uses the first sample pair, grad_outlet the last. Idempotent;
    the returned snapshot is otherwise identical.
    """
    if len(snapshot.samples) < 2:
        raise InsufficientDataError("need at least 2 snapshot samples for gradients")
    (x0, p0), (x1, p1) = snapshot.samples[0], snapshot.samples[1]
    (xa, pa), (xb, pb) = snapshot.samples[-2], snapshot.samples[-1]
    return dataclasses.replace(
        snapshot,
        grad_inlet=(p1 - p0) / (x1 - x0),
        grad_outlet=(pb - pa) / (xb - xa),
    )


def validate_scenario(spec: GasLineSpec, scenario: LeakScenario) -> list[str]:
    """Return the list of violated invariants (empty when valid).

    Violations are data, not failures: inputs are never mutated and no
    exception is raised here.
    """
    v: list[str] = []
    if not spec.length_L > 0:
        v.append("length_L must be positive")
    if not spec.diameter_d > 0:
        v.append("diameter_d must be positive")
    if not spec.crossover_spacing_l > 0:
        v.append("crossover_spacing_l must be positive")
    elif spec.crossover_spacing_l > spec.length_L:
        v.append("crossover_spacing_l must not exceed length_L")
    if not (spec.inlet_pressure_P1 > spec.outlet_pressure_P2 > 0):
        v.append("inlet_pressure_P1 > outlet_pressure_P2 > 0 violated")
    if not spec.sound_speed_c > 0:
        v.append("sound_speed_c must be positive")
    if not spec.friction_2a > 0:
        v.append("friction_2a must be positive")
    if not spec.inlet_flow_G0 > 0:
        v.append("inlet_flow_G0 must be positive")

    if not (0 < scenario.l1 < scenario.l2 < scenario.l3 <= spec.length_L):
        v.append("section ordering 0 < l1 < l2 < l3 <= length_L violated")
    elif spec.crossover_spacing_l > 0:
        span = scenario.l3 - scenario.l1
        k = span / spec.crossover_spacing_l
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            v.append("l3 - l1 is not a positive multiple of crossover_spacing_l")
    if not scenario.t1 > 0:
        v.append("t1 must be positive")
    if scenario.leak_outflow_Gleak < 0:
        v.append("leak_outflow_Gleak must be non-negative")
    if scenario.outlet_draw_Gout < 0:
        v.append("outlet_draw_Gout must be non-negative")

    snap = scenario.snapshot
    if len(snap.samples) < 2:
        v.append("snapshot needs at least 2 samples")
        return v
    xs = snap.xs()
    if not np.all(np.diff(xs) > 0):
        v.append("snapshot samples must be strictly increasing in x")
    if xs[0] != 0.0:
        v.append("first snapshot sample must be at x = 0")
    if xs[-1] != spec.length_L:
        v.append("last snapshot sample must be at x = length_L")
    if not np.all(snap.pressures() > 0):
        v.append("snapshot pressures must all be positive")
    return v


# --- scenario file handling -------------------------------------------------

_SPEC_FIELDS = {f.name for f in dataclasses.fields(GasLineSpec)}
_SCENARIO_FIELDS = {f.name for f in dataclasses.fields(LeakScenario)} - {"snapshot"}
_SNAPSHOT_FIELDS = {"samples", "grad_inlet", "grad_outlet"}


def _check_keys(obj: dict, allowed: set[str], where: str, required: set[str]) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"unknown field(s) in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"missing field(s) in {where}: {sorted(missing)}")


def parse_scenario_document(doc: dict) -> tuple[GasLineSpec, LeakScenario]:
    """Build (spec, scenario) from one parsed scenario JSON document."""
    if not isinstance(doc, dict):
        raise SchemaError("scenario document must be a JSON object")
    _check_keys(doc, {"spec", "scenario", "snapshot"}, "document", {"spec", "scenario", "snapshot"})
    _check_keys(doc["spec"], _SPEC_FIELDS, "spec", _SPEC_FIELDS)
    _check_keys(doc["scenario"], _SCENARIO_FIELDS, "scenario", _SCENARIO_FIELDS)
    _check_keys(doc["snapshot"], _SNAPSHOT_FIELDS, "snapshot", {"samples"})

    try:
        spec = GasLineSpec(**{k: float(doc["spec"][k]) for k in _SPEC_FIELDS})
        samples = tuple((float(x), float(p)) for x, p in doc["snapshot"]["samples"])
        snapshot = PressureSnapshot(
            samples=samples,
            grad_inlet=(None if doc["snapshot"].get("grad_inlet") is None
                        else float(doc["snapshot"]["grad_inlet"])),
            grad_outlet=(None if doc["snapshot"].get("grad_outlet") is None
                         else float(doc["snapshot"]["grad_outlet"])),
        )
        scenario = LeakScenario(
            snapshot=snapshot,
            **{k: float(doc["scenario"][k]) for k in _SCENARIO_FIELDS},
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scenario document: {exc}") from exc
    return spec, scenario


def load_scenario(path: str | Path, *, validate: bool = True) -> tuple[GasLineSpec, LeakScenario]:
    """Load a scenario JSON file; optionally enforce invariants.

    Raises ScenarioValidationError when ``validate`` is set and the file
    violates any invariant; the exception carries the full violation list.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    spec, scenario = parse_scenario_document(doc)
    if scenario.snapshot.grad_inlet is None or scenario.snapshot.grad_outlet is None:
        scenario = dataclasses.replace(
            scenario, snapshot=estimate_boundary_gradients(scenario.snapshot)
        )
    if validate:
        violations = validate_scenario(spec, scenario)
        if violations:
            raise ScenarioValidationError(violations)
    return spec, scenario


def dump_scenario(spec: GasLineSpec, scenario: LeakScenario) -> dict:
    """Inverse of :func:`parse_scenario_document` (gradients omitted)."""
    return {
        "spec": {k: getattr(spec, k) for k in sorted(_SPEC_FIELDS)},
        "scenario": {k: getattr(scenario, k) for k in sorted(_SCENARIO_FIELDS)},
        "snapshot": {"samples": [[x, p] for x, p in scenario.snapshot.samples]},
    }


def crossover_positions(spec: GasLineSpec) -> list[float]:
    """Interior crossover coordinates implied by the passport spacing."""
    out: list[float] = []
    k = 1
    while k * spec.crossover_spacing_l < spec.length_L - 1e-9:
        out.append(k * spec.crossover_spacing_l)
        k += 1
    return out


def sensor_sites(spec: GasLineSpec) -> list[float]:
    """Pressure-sensor coordinates: both ends plus every crossover."""
    return [0.0, *crossover_positions(spec), spec.length_L]


def benchmark_scenario_path() -> Path:
    """Path of the packaged benchmark scenario file."""
    return Path(__file__).parent / "data" / "scenario_benchmark.json"


def iter_snapshot_values(snapshot: PressureSnapshot) -> Iterable[tuple[float, float]]:
    return iter(snapshot.samples)
