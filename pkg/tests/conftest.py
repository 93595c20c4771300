"""Shared fixtures: strain presets and the (expensive) solved controls."""

from __future__ import annotations

import pytest

from wolbopt.ocp import solve
from wolbopt.params import preset
from wolbopt.scenarios import build_scenario, ocp_config


@pytest.fixture(scope="session")
def wmel():
    return preset("wmel")


@pytest.fixture(scope="session")
def wmelpop():
    return preset("wmelpop")


@pytest.fixture(scope="session")
def wmel_scenario():
    return build_scenario(preset("wmel"))


@pytest.fixture(scope="session")
def wmelpop_scenario():
    return build_scenario(preset("wmelpop"))


@pytest.fixture(scope="session")
def wmel_solution(wmel_scenario):
    return solve(wmel_scenario.params, ocp_config(wmel_scenario))


@pytest.fixture(scope="session")
def wmelpop_solution(wmelpop_scenario):
    return solve(wmelpop_scenario.params, ocp_config(wmelpop_scenario))
