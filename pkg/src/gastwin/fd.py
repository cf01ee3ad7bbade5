"""Finite-difference reference solver for the linearized pressure dynamics.

Independent check for the series evaluators. Solves

    dP/dt = (c^2 / 2a) d2P/dx2  + point sinks

on one isolated section with prescribed pressure-flux boundaries, using a
Crank-Nicolson step on a conservative finite-volume grid. The flux variables
are the same linearized flows the analytic solutions consume (Pa*s/m); a flow
G crossing a boundary carries pressure-flux c^2 G, so the spatial mean obeys

    d<P>/dt = c^2 (G_in - G_out - sum G_sink) / section_length

exactly, which is the linepack balance the tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError


@dataclass
class PressureField:
    """Rectangular (t, x) pressure grid for one section."""

    section_id: int
    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray  # shape (len(ts), len(xs))
    provenance: str  # "series" | "fd_oracle"
    converged: bool = True
    meta: dict = field(default_factory=dict)

    def mean_over_x(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def to_csv(self, path) -> None:
        """Write the long-form (x_m, t_s, pressure_pa) export."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("x_m,t_s,pressure_pa\n")
            for i, t in enumerate(self.ts):
                for j, x in enumerate(self.xs):
                    fh.write(f"{x:.3f},{t:.3f},{self.values[i, j]:.6f}\n")


def fd_oracle_solve(
    bounds: tuple[float, float],
    sound_speed_c: float,
    friction_2a: float,
    initial_profile: Callable[[np.ndarray], np.ndarray],
    *,
    inflow_left: float = 0.0,
    outflow_right: float = 0.0,
    point_sinks: Sequence[tuple[float, float]] = (),
    dx: float = 100.0,
    dt: float = 1.0,
    horizon: float = 600.0,
    t_start: float = 0.0,
    section_id: int = 0,
    store_every: int = 1,
) -> PressureField:
    """March the section from ``initial_profile`` over ``horizon`` seconds.

    Flux conventions: ``inflow_left`` > 0 feeds the section at the left
    boundary, ``outflow_right`` > 0 drains it at the right one, and each
    (x, G) in ``point_sinks`` drains G at the interior coordinate x. A zero
    flux is a closed valve. Values are stored every ``store_every`` steps
    (the initial state is always stored).
    """
    a, b = bounds
    if not b > a:
        raise ConfigurationError(f"empty section bounds {bounds}")
    if dx <= 0 or dt <= 0 or horizon < 0:
        raise ConfigurationError("dx, dt must be positive and horizon non-negative")
    if sound_speed_c <= 0 or friction_2a <= 0:
        raise ConfigurationError("sound_speed_c and friction_2a must be positive")

    width = b - a
    m = max(2, round(width / dx))
    dx_eff = width / m
    centers = a + (np.arange(m) + 0.5) * dx_eff
    p = np.asarray(initial_profile(centers), dtype=float).copy()
    if p.shape != centers.shape:
        raise ConfigurationError("initial_profile must return one value per cell")

    c2 = sound_speed_c**2
    diffusivity = c2 / friction_2a

    # constant source vector from boundary fluxes and sinks (Pa/s per cell)
    src = np.zeros(m)
    src[0] += c2 * inflow_left / dx_eff
    src[-1] -= c2 * outflow_right / dx_eff
    for x_sink, g_sink in point_sinks:
        if not a <= x_sink <= b:
            raise ConfigurationError(f"sink at {x_sink} outside section {bounds}")
        # split between the two nearest cells, conserving total strength
        pos = (x_sink - a) / dx_eff - 0.5
        i0 = int(np.clip(np.floor(pos), 0, m - 1))
        i1 = min(i0 + 1, m - 1)
        w1 = float(np.clip(pos - i0, 0.0, 1.0))
        src[i0] -= c2 * g_sink * (1.0 - w1) / dx_eff
        src[i1] -= c2 * g_sink * w1 / dx_eff

    # Laplacian with zero-flux boundaries, scaled by diffusivity/dx^2
    r = diffusivity / dx_eff**2
    lower = np.full(m, r)
    upper = np.full(m, r)
    diag = np.full(m, -2.0 * r)
    diag[0] = -r
    diag[-1] = -r

    # Crank-Nicolson: (I - dt/2 A) p' = (I + dt/2 A) p + dt*src
    half = dt / 2.0
    ab_lhs = np.zeros((3, m))
    ab_lhs[0, 1:] = -half * upper[:-1]
    ab_lhs[1, :] = 1.0 - half * diag
    ab_lhs[2, :-1] = -half * lower[1:]

    n_steps = int(round(horizon / dt))
    stored_ts = [t_start]
    stored = [p.copy()]
    for k in range(1, n_steps + 1):
        # explicit half-step A p without building the dense matrix
        ap = diag * p
        ap[:-1] += upper[:-1] * p[1:]
        ap[1:] += lower[1:] * p[:-1]
        rhs = p + half * ap + dt * src
        p = solve_banded((1, 1), ab_lhs, rhs)
        if k % store_every == 0 or k == n_steps:
            stored_ts.append(t_start + k * dt)
            stored.append(p.copy())

    return PressureField(
        section_id=section_id,
        xs=centers,
        ts=np.array(stored_ts),
        values=np.array(stored),
        provenance="fd_oracle",
        meta={
            "dx": dx_eff,
            "dt": dt,
            "net_flux": inflow_left - outflow_right - sum(g for _, g in point_sinks),
            "c2": c2,
            "width": width,
        },
    )


def linepack_rate(field: PressureField) -> float:
    """Mean-pressure change rate over the stored horizon (Pa/s)."""
    means = field.mean_over_x()
    span = field.ts[-1] - field.ts[0]
    if span <= 0:
        raise ConfigurationError("field spans no time")
    return float((means[-1] - means[0]) / span)


def expected_linepack_rate(field: PressureField) -> float:
    """c^2 * net inflow / length, the exact balance the solver must honor."""
    return field.meta["c2"] * field.meta["net_flux"] / field.meta["width"]
