import pytest

from persuasion_protocols.model import Environment, SignalModel

ACCEPTANCE_LINES = []


@pytest.fixture
def env07():
    return Environment.binary_symmetric(0.7)


@pytest.fixture
def env_asym():
    return Environment(0.6, SignalModel.binary_symmetric(0.7))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
