import numpy as np
import pytest

from nehari.discretization import DomainSpec
from nehari.energy import System, SystemSpec

_results = []


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_results):
        terminalreporter.write_line(line[1])


@pytest.fixture(scope="session")
def record():
    """Collect one pass/fail line per acceptance criterion."""

    def _record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _results.append((number, line))

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def pair_system():
    """Two components on the unit ball in R^3, p = 4, smooth coupling."""
    spec = SystemSpec.symmetric(4.0, [1.0, 2.0], [1.0, 1.5], -1.0, DomainSpec.ball(3))
    return System.build(spec, 401)


@pytest.fixture(scope="session")
def scalar_system():
    spec = SystemSpec.symmetric(3.0, [1.0], [1.0], 0.0, DomainSpec.ball(3))
    return System.build(spec, 401)
