"""Isolated-section localization from line-end pressure telemetry.

After the shut-off valves close, inlet pressure rises while outlet pressure
falls. The rise Z = P(0,t) - P(0,t1) feeds a quadratic whose positive root
is the left crossover coordinate l1; the right one follows by adding the
passport crossover spacing. The activation guard compares the inlet
compression ratio and the repressurized-side pressure at l1 against a
reference before any connecting valve may open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import GasLineSpec
from .errors import DomainBoundsError, InsufficientDataError

EULER_C = 0.577215

#: shape constant of the localization quadratic, 1/3 + 2/pi^2
_Q = 1.0 / 3.0 + 2.0 / math.pi**2


@dataclass(frozen=True)
class LocalizationParams:
    """Coefficients entering the localization quadratic and the guard bound."""

    euler_C: float = EULER_C
    Z: float = 0.0
    Z1: float = 0.0
    eps_max: float = 1.3

    def __post_init__(self):
        if not 1.0 < self.eps_max <= 1.5:
            raise ValueError(f"eps_max={self.eps_max} outside (1, 1.5]")


@dataclass(frozen=True)
class LocalizationEstimate:
    """Solved section bounds plus solver diagnostics.

    ``l1_hat``/``l3_hat`` are the raw positive-root values; the snapped
    variants are quantized to the crossover grid for valve addressing.
    ``relative_error_vs_truth`` is populated by tests only.
    """

    l1_hat: float
    l3_hat: float
    l1_snapped: float
    l3_snapped: float
    Z: float
    Z1: float
    residual: float
    detection_time: float
    relative_error_vs_truth: float | None = None


def flow_coefficient(spec: GasLineSpec) -> float:
    """Z1 = 2a G0 (1/3 + 2/pi^2), the quadratic's leading coefficient."""
    return spec.friction_2a * spec.inlet_flow_G0 * _Q


def quadratic_lhs(l1: float, Z: float, Z1: float, rhs: float) -> float:
    """Z1 l1^2 + Z l1 - rhs; zero at the localization root."""
    return Z1 * l1 * l1 + Z * l1 - rhs


def locate_l1(
    P0_now: float,
    P0_t1: float,
    t: float,
    t1: float,
    spec: GasLineSpec,
) -> float:
    """Left crossover coordinate from the inlet pressure rise since closure.

    Returns the positive root
        l1 = (sqrt(Z^2 + 8 c^2 G0 (1-C)(t-t1) Z1) - Z) / (2 Z1)
    with Z = P0_now - P0_t1 and Z1 = 2a G0 (1/3 + 2/pi^2). Strictly
    decreasing in Z at fixed elapsed time, strictly increasing in t - t1.
    """
    if t <= t1:
        if t == t1:
            return 0.0
        raise DomainBoundsError(f"t={t} must not precede closure t1={t1}")
    Z = P0_now - P0_t1
    if Z < 0:
        raise DomainBoundsError(
            f"inlet rise Z={Z:.6g} Pa is negative; closure signature violated"
        )
    Z1 = flow_coefficient(spec)
    c2 = spec.sound_speed_c**2
    rhs = 2.0 * c2 * spec.inlet_flow_G0 * (1.0 - EULER_C) * (t - t1)
    return (math.sqrt(Z * Z + 4.0 * Z1 * rhs) - Z) / (2.0 * Z1)


def locate_l3(l1_hat: float, spacing: float) -> float:
    """Right crossover coordinate: one spacing beyond the left one."""
    if l1_hat < 0:
        raise DomainBoundsError(f"l1_hat={l1_hat} must be non-negative")
    if spacing <= 0:
        raise DomainBoundsError(f"spacing={spacing} must be positive")
    return l1_hat + spacing


def snap_to_crossover(l1_hat: float, spacing: float, length_L: float) -> float:
    """Quantize a raw coordinate to the nearest interior crossover."""
    if spacing <= 0:
        raise DomainBoundsError(f"spacing={spacing} must be positive")
    k = max(1, round(l1_hat / spacing))
    k = min(k, max(1, int(length_L / spacing) - 1))
    return k * spacing


def estimate_sections(
    P0_now: float,
    P0_t1: float,
    t: float,
    t1: float,
    spec: GasLineSpec,
) -> LocalizationEstimate:
    """Full localization: raw root, snapped valve addresses, and residual."""
    l1 = locate_l1(P0_now, P0_t1, t, t1, spec)
    spacing = spec.crossover_spacing_l
    l3 = locate_l3(l1, spacing)
    Z = P0_now - P0_t1
    Z1 = flow_coefficient(spec)
    rhs = 2.0 * spec.sound_speed_c**2 * spec.inlet_flow_G0 * (1.0 - EULER_C) * (t - t1)
    l1s = snap_to_crossover(l1, spacing, spec.length_L)
    return LocalizationEstimate(
        l1_hat=l1,
        l3_hat=l3,
        l1_snapped=l1s,
        l3_snapped=l1s + spacing,
        Z=Z,
        Z1=Z1,
        residual=quadratic_lhs(l1, Z, Z1, rhs),
        detection_time=t,
    )


@dataclass(frozen=True)
class ActivationVerdict:
    """Outcome of the connecting-valve gate with both evaluated quantities."""

    allow: bool
    inlet_ratio: float
    eps_max: float
    p_damaged: float
    p_reference: float

    @property
    def label(self) -> str:
        return "ALLOW" if self.allow else "DENY"


def check_activation(
    P0_now: float,
    P1_nominal: float,
    P_l1_damaged: float,
    P_l1_reference: float,
    eps_max: float = 1.3,
) -> ActivationVerdict:
    """Gate for opening the connecting valves.

    ALLOW iff the inlet compression ratio P0_now / P1_nominal stays under
    eps_max (compressor protection) and the repressurized side at l1 strictly
    exceeds the reference pressure there.
    """
    if min(P0_now, P1_nominal, P_l1_damaged, P_l1_reference) <= 0:
        raise DomainBoundsError("all pressures must be positive")
    ratio = P0_now / P1_nominal
    allow = ratio < eps_max and P_l1_damaged > P_l1_reference
    return ActivationVerdict(
        allow=allow,
        inlet_ratio=ratio,
        eps_max=eps_max,
        p_damaged=P_l1_damaged,
        p_reference=P_l1_reference,
    )


def detect_closure_signature(
    times: list[float],
    inlet: list[float],
    outlet: list[float],
    nominal_P1: float,
    nominal_P2: float,
    *,
    confirmation_samples: int = 2,
) -> float | None:
    """Earliest time the closure signature holds for a confirmation window.

    The signature is a sustained simultaneous inlet rise above nominal P1 and
    outlet fall below nominal P2; it distinguishes valve closure from other
    transients. Returns None when never confirmed.
    """
    if not times or len(times) != len(inlet) or len(times) != len(outlet):
        raise InsufficientDataError("inlet/outlet series must share a non-empty time grid")
    if confirmation_samples < 1:
        raise ValueError("confirmation_samples must be >= 1")
    run = 0
    for i, t in enumerate(times):
        if inlet[i] > nominal_P1 and outlet[i] < nominal_P2:
            run += 1
            if run >= confirmation_samples:
                return times[i - confirmation_samples + 1]
        else:
            run = 0
    return None
