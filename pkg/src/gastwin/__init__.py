"""Desk-scale digital twin of a parallel gas-pipeline pair.

Models the post-closure pressure transients of an isolated leaking section,
localizes the bracketing crossovers from line-end telemetry, and drives the
connecting-valve activation that restores supply, with a simulated telemetry
bus and an operator stream service.
"""

from .domain import (
    GasLineSpec,
    LeakScenario,
    PressureSnapshot,
    estimate_boundary_gradients,
    load_scenario,
    stationary_pressure,
    validate_scenario,
)
from .fd import PressureField, fd_oracle_solve
from .localization import (
    ActivationVerdict,
    LocalizationEstimate,
    check_activation,
    detect_closure_signature,
    locate_l1,
    locate_l3,
)
from .transient import (
    SectionModels,
    TransientParams,
    emit_table,
    inlet_pressure,
    section1_pressure,
    section2_pressure,
    section3_pressure,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationVerdict",
    "GasLineSpec",
    "LeakScenario",
    "LocalizationEstimate",
    "PressureField",
    "PressureSnapshot",
    "SectionModels",
    "TransientParams",
    "check_activation",
    "detect_closure_signature",
    "emit_table",
    "estimate_boundary_gradients",
    "fd_oracle_solve",
    "inlet_pressure",
    "load_scenario",
    "locate_l1",
    "locate_l3",
    "section1_pressure",
    "section2_pressure",
    "section3_pressure",
    "stationary_pressure",
    "validate_scenario",
]
