import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from artifact import maps
from artifact.billiard import geometry

settings.register_profile("artifact", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("artifact")

# eigen-data of E = [[6, 1], [1, 1]] from the characteristic polynomial x^2 - 7x + 5
SQRT29 = math.sqrt(29.0)
LAM_U = (7.0 + SQRT29) / 2.0
LAM_S = (7.0 - SQRT29) / 2.0


def eigvec(lam):
    # (E - lam) v = 0 with E = [[6, 1], [1, 1]]  =>  v = (1, lam - 6)
    v = np.array([1.0, lam - 6.0])
    return v / np.linalg.norm(v)


@pytest.fixture
def linear_map():
    return maps.LinearEndo([[6, 1], [1, 1]])


@pytest.fixture
def acs_map():
    return maps.default_acs_map()


@pytest.fixture
def three_disc():
    return geometry.three_disc_table()


@pytest.fixture
def two_disc():
    return geometry.two_disc_table()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def record_acceptance(number: int, ok: bool, text: str):
    line = f"AC{number:02d} {'PASS' if ok else 'FAIL'}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
