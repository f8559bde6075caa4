import pytest

from snapbeam import bistability as bst
from snapbeam import scenarios as sc
from snapbeam.model import dof_index

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def arch():
    return sc.make_shallow_arch()


@pytest.fixture(scope="session")
def arch_apex_w(arch):
    return dof_index(sc.apex_node(arch), "w")


@pytest.fixture(scope="session")
def arch_analysis(arch):
    return bst.analyze(arch)
