import math

import numpy as np
import pytest

from minreg import Ball, Box2D, ProblemConfig

_acceptance_results = {}


@pytest.fixture
def wide_pair():
    """Equal moduli, L = 10, minimizers 8 apart."""
    return ProblemConfig([-4.0, 0.0], [4.0, 0.0], 1.0, 1.0, 10.0)


@pytest.fixture
def near_pair():
    return ProblemConfig([-1.0, 0.0], [1.0, 0.0], 1.0, 1.0, 10.0)


@pytest.fixture
def circle_body():
    return Ball([0.0, 1.0], 5.0)


@pytest.fixture
def box_body():
    return Box2D([0.0, 1.0], [5.0, 5.0], math.pi / 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_ac"):
        key = name.split("_")[1].upper()
        ok = report.outcome == "passed"
        _acceptance_results[key] = _acceptance_results.get(key, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance_results, key=lambda k: int(k[2:])):
        status = "PASS" if _acceptance_results[key] else "FAIL"
        terminalreporter.write_line(f"{key}: {status}")
