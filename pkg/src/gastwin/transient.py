"""Post-closure pressure fields of the three isolated sections.

Each section obeys the linearized dynamics dP/dt = (c^2/2a) d2P/dx2 with
zero flux at closed valves. On a section [A, B] of width W with cosine
harmonics phi_n(x) = cos(pi n (x - A) / W) and decay rates
alpha_n = pi^2 n^2 c^2 / (2a W^2), the pressure splits into three parts:

  * the t1 profile relaxing harmonic by harmonic,
        S(x) + sum_n a_n (e^{-alpha_n dt} - 1) phi_n(x),
    where a_n are the cosine coefficients of the measured t1 field;
  * a secular linepack term c^2 G dt / W per unit boundary/point flow;
  * the flow's harmonic response
        (2 c^2 G / W) sum_n k_n phi_n(x) (1 - e^{-alpha_n dt}) / alpha_n,
    with k_n the harmonic weight of where the flow enters or leaves:
    k_n = 1 at the left boundary, (-1)^n at the right one, and
    cos(pi n (x_leak - A)/W) for an interior leak.

Section 1 (0..l1) is fed G0 at the inlet; section 2 (l1..l3) drains through
the leak at l2; section 3 (l3..L) drains into the consumer draw at x = L.
All flows are taken constant over the horizon, so every time integral is
evaluated in closed form. At t = t1 every term vanishes and the snapshot is
reproduced exactly, truncation included.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import GasLineSpec, LeakScenario, PressureSnapshot
from .errors import ConfigurationError, DomainBoundsError
from .fd import PressureField

DEFAULT_SERIES_CAP = 200
DEFAULT_TERM_TOLERANCE = 1.0  # Pa; table values carry 1e2 Pa resolution

TABLE_OFFSETS = (0.0, 120.0, 240.0, 360.0, 480.0, 600.0)


class SeriesConvergenceWarning(UserWarning):
    """Raised as a diagnostic when the harmonic cap is hit before tolerance."""


@dataclass(frozen=True)
class TransientParams:
    """Section geometry, timing, and series truncation policy."""

    l1: float
    l2: float
    l3: float
    length_L: float
    t1: float
    sound_speed_c: float
    friction_2a: float
    series_cap: int = DEFAULT_SERIES_CAP
    term_tolerance: float = DEFAULT_TERM_TOLERANCE

    def __post_init__(self):
        # the three-section model needs a non-empty outlet section, so l3 < L
        if not (0 < self.l1 < self.l2 < self.l3 < self.length_L):
            raise ConfigurationError("section bounds must satisfy 0 < l1 < l2 < l3 < L")
        if self.sound_speed_c <= 0 or self.friction_2a <= 0:
            raise ConfigurationError("sound_speed_c and friction_2a must be positive")
        if self.series_cap < 1:
            raise ConfigurationError("series_cap must be >= 1")
        if self.term_tolerance <= 0:
            raise ConfigurationError("term_tolerance must be positive")

    @classmethod
    def from_scenario(
        cls,
        spec: GasLineSpec,
        scenario: LeakScenario,
        *,
        series_cap: int = DEFAULT_SERIES_CAP,
        term_tolerance: float = DEFAULT_TERM_TOLERANCE,
    ) -> "TransientParams":
        return cls(
            l1=scenario.l1,
            l2=scenario.l2,
            l3=scenario.l3,
            length_L=spec.length_L,
            t1=scenario.t1,
            sound_speed_c=spec.sound_speed_c,
            friction_2a=spec.friction_2a,
            series_cap=series_cap,
            term_tolerance=term_tolerance,
        )

    def _prefactor(self, width: float) -> float:
        return math.pi**2 * self.sound_speed_c**2 / (self.friction_2a * width**2)

    @property
    def alpha3_coeff(self) -> float:
        """Decay-rate prefactor of section 1: alpha_n = coeff * n^2."""
        return self._prefactor(self.l1)

    @property
    def alpha4_coeff(self) -> float:
        return self._prefactor(self.l3 - self.l1)

    @property
    def alpha5_coeff(self) -> float:
        return self._prefactor(self.length_L - self.l3)

    @property
    def alpha_inlet(self) -> float:
        """Decay-rate prefactor of the inlet-point closed forms (= alpha3_coeff)."""
        return self.alpha3_coeff

    def section_bounds(self, section_id: int) -> tuple[float, float]:
        if section_id == 1:
            return 0.0, self.l1
        if section_id == 2:
            return self.l1, self.l3
        if section_id == 3:
            return self.l3, self.length_L
        raise DomainBoundsError(f"unknown section id {section_id}")


def cosine_coefficients(
    xs: np.ndarray, ps: np.ndarray, a: float, width: float, n_max: int
) -> np.ndarray:
    """Exact cosine coefficients a_1..a_n_max of a piecewise-linear profile.

    a_n = (2/W) integral of S(x) cos(pi n (x-a)/W) dx, computed segment by
    segment from the antiderivative S(u) sin(ku)/k + S'(u) cos(ku)/k^2.
    """
    u = np.asarray(xs, dtype=float) - a
    p = np.asarray(ps, dtype=float)
    slopes = np.diff(p) / np.diff(u)
    n = np.arange(1, n_max + 1)
    k = math.pi * n / width  # shape (N,)
    uu = u[None, :]  # (1, M)
    sin_ku = np.sin(k[:, None] * uu)
    cos_ku = np.cos(k[:, None] * uu)
    f = p[None, :] * sin_ku / k[:, None]
    # antiderivative pieces at segment ends; slope term differs per segment
    left = f[:, :-1] + slopes[None, :] * cos_ku[:, :-1] / k[:, None] ** 2
    right = f[:, 1:] + slopes[None, :] * cos_ku[:, 1:] / k[:, None] ** 2
    return (2.0 / width) * np.sum(right - left, axis=1)


@dataclass(frozen=True)
class _SectionSetup:
    a: float
    width: float
    alpha_coeff: float
    ic_coeffs: np.ndarray  # a_n of the snapshot restricted to the section
    flow_weights: np.ndarray  # k_n of where the flow crosses the section
    flow_sign: float  # +1 inflow raises, -1 outflow drains


@functools.lru_cache(maxsize=64)
def _section_setup(
    params: TransientParams, snapshot: PressureSnapshot, section_id: int
) -> _SectionSetup:
    a, b = params.section_bounds(section_id)
    width = b - a
    n = np.arange(1, params.series_cap + 1)
    if section_id == 1:
        alpha_coeff = params.alpha3_coeff
        weights = np.ones_like(n, dtype=float)  # inflow at the left boundary
        sign = 1.0
    elif section_id == 2:
        alpha_coeff = params.alpha4_coeff
        weights = np.cos(math.pi * n * (params.l2 - a) / width)  # interior leak
        sign = -1.0
    else:
        alpha_coeff = params.alpha5_coeff
        weights = np.where(n % 2 == 0, 1.0, -1.0)  # draw at the right boundary
        sign = -1.0
    xs, ps = snapshot.section_nodes(a, b)
    ic = cosine_coefficients(xs, ps, a, width, params.series_cap)
    return _SectionSetup(a, width, alpha_coeff, ic, weights, sign)


def _series_terms_needed(
    setup: _SectionSetup, params: TransientParams, flow: float, dt_max: float, c2: float
) -> tuple[int, bool]:
    """First harmonic count whose next term envelope drops below tolerance."""
    n = np.arange(1, params.series_cap + 1)
    alpha = setup.alpha_coeff * n**2
    damp = -np.expm1(-alpha * dt_max)  # 1 - e^{-alpha dt_max}, in [0, 1]
    ic_env = np.abs(setup.ic_coeffs) * damp
    flow_env = (
        2.0 * c2 * abs(flow) / setup.width * np.abs(setup.flow_weights) * damp / alpha
    )
    env = np.maximum(ic_env, flow_env)
    small = np.nonzero(env < params.term_tolerance)[0]
    if small.size:
        return int(small[0]) + 1, True
    return params.series_cap, False


def _evaluate_section(
    params: TransientParams,
    snapshot: PressureSnapshot,
    section_id: int,
    flow: float,
    xs: np.ndarray,
    ts: np.ndarray,
) -> tuple[np.ndarray, bool]:
    """Series evaluation on the (ts, xs) grid; returns (values, converged)."""
    a, b = params.section_bounds(section_id)
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if np.any(xs < a - 1e-9) or np.any(xs > b + 1e-9):
        raise DomainBoundsError(f"x outside section {section_id} bounds [{a}, {b}]")
    if np.any(ts < params.t1 - 1e-12):
        raise DomainBoundsError(f"t precedes closure t1={params.t1}")

    c2 = params.sound_speed_c**2
    setup = _section_setup(params, snapshot, section_id)
    dts = ts - params.t1
    dt_max = float(dts.max(initial=0.0))
    n_used, converged = _series_terms_needed(setup, params, flow, dt_max, c2)
    if not converged:
        warnings.warn(
            f"section {section_id}: harmonic cap {params.series_cap} reached before "
            f"term tolerance {params.term_tolerance} Pa",
            SeriesConvergenceWarning,
            stacklevel=3,
        )

    n = np.arange(1, n_used + 1)
    alpha = setup.alpha_coeff * n**2  # (N,)
    phi = np.cos(math.pi * np.outer(n, xs - a) / setup.width)  # (N, X)
    decay = np.exp(-np.outer(dts, alpha))  # (T, N)

    base = snapshot.interp(xs)[None, :]  # (1, X)
    ic = (decay - 1.0) @ (setup.ic_coeffs[:n_used, None] * phi)  # (T, X)
    secular = setup.flow_sign * c2 * flow / setup.width * dts[:, None]
    resp_coeff = (
        setup.flow_sign
        * 2.0
        * c2
        * flow
        / setup.width
        * setup.flow_weights[:n_used]
        / alpha
    )
    response = (1.0 - decay) @ (resp_coeff[:, None] * phi)
    return base + ic + secular + response, converged


def _scalar(params, snapshot, section_id, flow, x, t) -> float:
    values, _ = _evaluate_section(
        params, snapshot, section_id, flow, np.array([x]), np.array([t])
    )
    return float(values[0, 0])


def section1_pressure(
    params: TransientParams, snapshot: PressureSnapshot, G0: float, x: float, t: float
) -> float:
    """Section-1 pressure at (x, t): inlet keeps feeding G0, far valve closed."""
    return _scalar(params, snapshot, 1, G0, x, t)


def section2_pressure(
    params: TransientParams, snapshot: PressureSnapshot, Gleak: float, x: float, t: float
) -> float:
    """Section-2 pressure at (x, t): sealed both ends, leak draws at l2."""
    return _scalar(params, snapshot, 2, Gleak, x, t)


def section3_pressure(
    params: TransientParams, snapshot: PressureSnapshot, Gout: float, x: float, t: float
) -> float:
    """Section-3 pressure at (x, t): sealed at l3, consumers draw at x = L."""
    return _scalar(params, snapshot, 3, Gout, x, t)


def section_field(
    params: TransientParams,
    snapshot: PressureSnapshot,
    section_id: int,
    flow: float,
    xs: np.ndarray,
    ts: np.ndarray,
) -> PressureField:
    """Vectorized section evaluation packaged as a PressureField."""
    values, converged = _evaluate_section(params, snapshot, section_id, flow, xs, ts)
    return PressureField(
        section_id=section_id,
        xs=np.asarray(xs, dtype=float),
        ts=np.asarray(ts, dtype=float),
        values=values,
        provenance="series",
        converged=converged,
    )


def inlet_pressure(
    params: TransientParams,
    snapshot: PressureSnapshot,
    G0: float,
    t: float,
    mode: str = "exact",
) -> float:
    """Inlet-point (x = 0) pressure in one of two closed forms.

    mode="exact" sums the inlet-point harmonic series
        P(0,t1) + (2 c^2 G0 / l1) sum_n
            (e^{-a n^2 (t-t1)} + e^{-a n^2 t} - e^{-a n^2 t1} - 1) / (a n^2)
    (the constant -2a G0 l1 / 3 folded term by term so truncation cannot
    break continuity at t1). mode="simplified" is the Euler-constant
    approximation
        P(0,t1) + (2 c^2 G0 / l1)(t-t1)(1-C) - 2a G0 l1 (1/3 + 2/pi^2),
    which carries a known constant offset at t = t1; the exact mode is the
    one that reduces to the snapshot there.
    """
    if t < params.t1:
        raise DomainBoundsError(f"t={t} precedes closure t1={params.t1}")
    p0_t1 = float(snapshot.interp(0.0))
    c2 = params.sound_speed_c**2
    l1 = params.l1
    if mode == "simplified":
        from .localization import EULER_C

        q = 1.0 / 3.0 + 2.0 / math.pi**2
        return (
            p0_t1
            + (2.0 * c2 * G0 / l1) * (t - params.t1) * (1.0 - EULER_C)
            - params.friction_2a * G0 * l1 * q
        )
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    a = params.alpha_inlet
    total = 0.0
    for n in range(1, params.series_cap + 1):
        an2 = a * n * n
        term = (
            math.exp(-an2 * (t - params.t1))
            + math.exp(-an2 * t)
            - math.exp(-an2 * params.t1)
            - 1.0
        ) / an2
        total += term
        if abs(term) * (2.0 * c2 * G0 / l1) < params.term_tolerance and n >= 4:
            break
    else:
        warnings.warn(
            "inlet series hit the harmonic cap before tolerance",
            SeriesConvergenceWarning,
            stacklevel=2,
        )
    return p0_t1 + (2.0 * c2 * G0 / l1) * total


# --- tables ------------------------------------------------------------------


@dataclass
class SectionModels:
    """The three section evaluators bound to one scenario."""

    params: TransientParams
    snapshot: PressureSnapshot
    G0: float
    Gleak: float
    Gout: float

    @classmethod
    def from_scenario(cls, spec: GasLineSpec, scenario: LeakScenario) -> "SectionModels":
        return cls(
            params=TransientParams.from_scenario(spec, scenario),
            snapshot=scenario.snapshot,
            G0=spec.inlet_flow_G0,
            Gleak=scenario.leak_outflow_Gleak,
            Gout=scenario.outlet_draw_Gout,
        )

    def flow(self, section_id: int) -> float:
        return {1: self.G0, 2: self.Gleak, 3: self.Gout}[section_id]

    def pressure(self, section_id: int, x: float, t: float) -> float:
        return _scalar(self.params, self.snapshot, section_id, self.flow(section_id), x, t)

    def field(self, section_id: int, xs: np.ndarray, ts: np.ndarray) -> PressureField:
        return section_field(
            self.params, self.snapshot, section_id, self.flow(section_id), xs, ts
        )

    def table_xs(self, section_id: int) -> list[float]:
        """The tabulated x grid: section ends plus the leak point in section 2."""
        a, b = self.params.section_bounds(section_id)
        if section_id == 1:
            return [0.0, self.params.l1 / 2.0, self.params.l1]
        if section_id == 2:
            return [a, self.params.l2, b]
        return [a, (a + b) / 2.0, b]


@dataclass
class PressureTable:
    """Pressure-vs-time table in the exported layout (rows x, columns t1+a)."""

    section_id: int
    xs_m: list[float]
    offsets_s: list[float]
    values_pa: np.ndarray  # shape (len(xs_m), len(offsets_s))

    def header(self) -> list[str]:
        return ["x_km"] + [f"a{int(a)}" for a in self.offsets_s]

    def rows_1e4(self) -> list[list[float]]:
        return [
            [x / 1000.0] + [v / 1e4 for v in row]
            for x, row in zip(self.xs_m, self.values_pa)
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(self.header()) + "\n")
            if not self.offsets_s:
                return
            for row in self.rows_1e4():
                fh.write(f"{row[0]:g}," + ",".join(f"{v:.2f}" for v in row[1:]) + "\n")


def emit_table(
    models: SectionModels,
    section_id: int,
    offsets_s: list[float] | tuple[float, ...] = TABLE_OFFSETS,
    xs_m: list[float] | None = None,
) -> PressureTable:
    """Tabulate one section on the standard grid (times relative to t1)."""
    xs = list(models.table_xs(section_id) if xs_m is None else xs_m)
    offsets = list(offsets_s)
    a, b = models.params.section_bounds(section_id)
    for x in xs:
        if not a - 1e-9 <= x <= b + 1e-9:
            raise DomainBoundsError(f"x={x} outside section {section_id}")
    if not offsets:
        return PressureTable(section_id, xs, [], np.zeros((len(xs), 0)))
    ts = np.array([models.params.t1 + off for off in offsets])
    field = models.field(section_id, np.array(xs), ts)
    return PressureTable(section_id, xs, offsets, field.values.T.copy())


# --- reference comparison and flow calibration --------------------------------


def load_reference_tables(path: str | Path | None = None) -> dict[int, PressureTable]:
    """Benchmark reference tables shipped with the package (values in Pa)."""
    if path is None:
        path = Path(__file__).parent / "data" / "reference_tables.csv"
    tables: dict[int, list[tuple[float, list[float]]]] = {}
    offsets: list[float] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        offsets = [float(h[1:]) for h in header[2:]]
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            sid = int(parts[0])
            x_m = float(parts[1]) * 1000.0
            vals = [float(v) * 1e4 for v in parts[2:]]
            tables.setdefault(sid, []).append((x_m, vals))
    out = {}
    for sid, rows in tables.items():
        out[sid] = PressureTable(
            section_id=sid,
            xs_m=[r[0] for r in rows],
            offsets_s=list(offsets),
            values_pa=np.array([r[1] for r in rows]),
        )
    return out


def table_deltas(model: PressureTable, reference: PressureTable) -> np.ndarray:
    """Per-cell model - reference deltas (Pa); grids must match."""
    if model.xs_m != reference.xs_m or model.offsets_s != reference.offsets_s:
        raise ConfigurationError("model and reference tables use different grids")
    return model.values_pa - reference.values_pa


def comparison_csv(model: PressureTable, reference: PressureTable, path) -> None:
    """Long-form per-cell comparison: model, reference, and delta in 1e4 Pa."""
    deltas = table_deltas(model, reference)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("section,x_km,offset_s,model_1e4pa,ref_1e4pa,delta_1e4pa\n")
        for i, x in enumerate(model.xs_m):
            for j, off in enumerate(model.offsets_s):
                fh.write(
                    f"{model.section_id},{x / 1000.0:g},{int(off)},"
                    f"{model.values_pa[i, j] / 1e4:.2f},"
                    f"{reference.values_pa[i, j] / 1e4:.2f},"
                    f"{deltas[i, j] / 1e4:.2f}\n"
                )


def calibrate_section_flow(
    params: TransientParams,
    snapshot: PressureSnapshot,
    section_id: int,
    reference: PressureTable,
) -> float:
    """Least-squares constant flow that best reproduces a reference table.

    The section response is linear in its flow, so the fit is closed form:
    G* = sum(f r) / sum(f f) with r the reference residual over the zero-flow
    field and f the unit-flow response.
    """
    ts = np.array([params.t1 + off for off in reference.offsets_s])
    xs = np.array(reference.xs_m)
    zero, _ = _evaluate_section(params, snapshot, section_id, 0.0, xs, ts)
    unit, _ = _evaluate_section(params, snapshot, section_id, 1.0, xs, ts)
    f = (unit - zero).T  # (X, T) like the table
    r = reference.values_pa - zero.T
    denom = float(np.sum(f * f))
    if denom == 0.0:
        raise ConfigurationError("reference grid gives no flow response to fit")
    return float(np.sum(f * r) / denom)
