from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from gindex.config import build_scenario, load
from gindex.tasks import build_parametrix

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

settings.register_profile(
    "gindex", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("gindex")

ACCEPTANCE: list[tuple[str, bool, str]] = []


def scenario_from(name: str):
    _, cfg = load(CONFIGS / f"{name}.json")
    return build_scenario(cfg)


@pytest.fixture(scope="session")
def winding():
    return scenario_from("winding")


@pytest.fixture(scope="session")
def rotation():
    return scenario_from("rotation")


@pytest.fixture(scope="session")
def reflection():
    return scenario_from("reflection")


@pytest.fixture(scope="session")
def reflection_parametrix(reflection):
    return build_parametrix(reflection)


@pytest.fixture(scope="session")
def winding_parametrix(winding):
    return build_parametrix(winding)


@pytest.fixture(scope="session")
def rotation_parametrix(rotation):
    return build_parametrix(rotation)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
