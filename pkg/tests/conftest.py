import numpy as np
import pytest

from chemolab.grid import Grid, ScalarField


@pytest.fixture
def unit64():
    return Grid(64, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_field(grid, rng, lo=0.0, hi=1.0):
    return ScalarField(grid, rng.uniform(lo, hi, size=grid.shape))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, text = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {text}")
