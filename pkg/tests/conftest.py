from pathlib import Path

import numpy as np
import pytest

from dualsdp import load_network
from dualsdp.grid import Bus, Generator, make_network

CASES = Path(__file__).resolve().parents[1] / "src" / "dualsdp" / "cases"


def case_path(name: str) -> Path:
    return CASES / name


@pytest.fixture(scope="session")
def net2():
    return load_network(case_path("case2.m"))


@pytest.fixture(scope="session")
def net3():
    return load_network(case_path("case3.m"))


@pytest.fixture(scope="session")
def net14():
    return load_network(case_path("pglib_opf_case14_ieee.m"))


@pytest.fixture(params=["case2.m", "case3.m", "pglib_opf_case14_ieee.m"], scope="session")
def fixture_net(request):
    return load_network(case_path(request.param))


def one_bus_network(p=0.3, q=0.1, cost=10.0):
    return make_network(
        [Bus(0, v_min=0.95, v_max=1.05)],
        [Generator(0, cost=cost, p_min=0.0, p_max=1.0, q_min=-1.0, q_max=1.0)],
        [],
        [p],
        [q],
    )


def random_prediction_vector(net, rng, scale=10.0):
    from dualsdp import Prediction

    return rng.normal(0.0, scale, Prediction.size(net))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
