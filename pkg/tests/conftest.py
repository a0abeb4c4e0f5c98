import numpy as np
import pytest

from kinavg.driving import SigmaModel
from kinavg.velocity import make_continuous_model, make_discrete_model

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def discrete1():
    return make_discrete_model(1)


@pytest.fixture(scope="session")
def discrete1_drift():
    return make_discrete_model(1, [0.3])


@pytest.fixture(scope="session")
def discrete2():
    return make_discrete_model(2, [0.3, -0.2])


@pytest.fixture(scope="session")
def continuous():
    return make_continuous_model(1, 32, [0.2])


@pytest.fixture(scope="session")
def sigma32():
    return SigmaModel.from_functions(lambda x: 0.5 + 0.2 * np.sin(2 * np.pi * x),
                                     lambda x: np.cos(2 * np.pi * x), 32, m_bar=0.4)


@pytest.fixture(scope="session")
def sigma2d():
    return SigmaModel.from_functions(
        lambda x, y: 0.5 + 0.1 * np.cos(2 * np.pi * y),
        lambda x, y: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y), 16, d=2, m_bar=-0.3)


@pytest.fixture
def acceptance_report():
    def report(number, passed, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
