import os
import sys

import pytest

from aisbn import BayesianNetwork, Cpt, Node, load_network

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance checklist after the run, outside capture."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "CHECKLIST", ()) if module else ()
    if lines:
        terminalreporter.section("acceptance checklist")
        for line in lines:
            terminalreporter.write_line(line)


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


def build_chain3() -> BayesianNetwork:
    nodes = [
        Node("A", ("false", "true")),
        Node("B", ("false", "true"), ("A",)),
        Node("C", ("false", "true"), ("B",)),
    ]
    cpts = [
        Cpt("A", [[0.7, 0.3]]),
        Cpt("B", [[0.9, 0.1], [0.2, 0.8]]),
        Cpt("C", [[0.8, 0.2], [0.1, 0.9]]),
    ]
    return BayesianNetwork("chain3", nodes, cpts)


@pytest.fixture(scope="session")
def chain3():
    return build_chain3()


@pytest.fixture(scope="session")
def chain3_file():
    return fixture_path("chain3.bn")


@pytest.fixture(scope="session")
def chain5():
    return load_network(fixture_path("chain5.bn"))


@pytest.fixture(scope="session")
def diamond():
    return load_network(fixture_path("diamond.bn"))


@pytest.fixture(scope="session")
def mixed9():
    return load_network(fixture_path("mixed9.bn"))
