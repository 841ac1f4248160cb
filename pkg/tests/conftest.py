import numpy as np
import pytest

from qtraj import zoo


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def qubit():
    return zoo.build_monitored_qubit(1.0, 0.7)


@pytest.fixture(scope="session")
def two_qubit():
    return zoo.build_two_qubit_dark(1.0, 0.2)


@pytest.fixture(scope="session")
def kerr():
    return zoo.build_preset("kerr")[0]


@pytest.fixture(scope="session")
def scar():
    return zoo.build_preset("scar")[0]


def ket(*amps):
    v = np.array(amps, dtype=complex)
    return v / np.linalg.norm(v)


def dm(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import SUMMARY
    except ImportError:
        return
    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in SUMMARY:
            terminalreporter.write_line(line)
