import pytest

from gastwin.domain import (
    GasLineSpec,
    LeakScenario,
    PressureSnapshot,
    benchmark_scenario_path,
    estimate_boundary_gradients,
    load_scenario,
)

SNAPSHOT_SAMPLES = (
    (0.0, 13.36e4),
    (5000.0, 12.82e4),
    (10000.0, 12.19e4),
    (14500.0, 11.56e4),
    (20000.0, 11.24e4),
    (25000.0, 10.86e4),
    (30000.0, 10.4e4),
)


@pytest.fixture(scope="session")
def benchmark() -> tuple[GasLineSpec, LeakScenario]:
    return load_scenario(benchmark_scenario_path())


@pytest.fixture(scope="session")
def spec(benchmark) -> GasLineSpec:
    return benchmark[0]


@pytest.fixture(scope="session")
def scenario(benchmark) -> LeakScenario:
    return benchmark[1]


@pytest.fixture(scope="session")
def snapshot(scenario) -> PressureSnapshot:
    return scenario.snapshot


@pytest.fixture()
def bare_snapshot() -> PressureSnapshot:
    return estimate_boundary_gradients(PressureSnapshot(samples=SNAPSHOT_SAMPLES))
