import numpy as np
import pytest

from dmnls.ground_state import petviashvili_solve
from dmnls.spectral_grid import Field, SpectralGrid


@pytest.fixture(scope="session")
def grid1d():
    return SpectralGrid(1, 512, 20.0)


@pytest.fixture(scope="session")
def Q1d(grid1d):
    return petviashvili_solve(grid1d, 1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid, rng, smooth=True):
    """Random complex field; ``smooth`` damps it with a Gaussian envelope."""
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if smooth:
        v = v * np.exp(-grid.r2 / 8.0)
    return Field(grid, v)


@pytest.fixture(scope="session")
def radial3d():
    from oracles import radial_ground_state

    return radial_ground_state(3)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def report(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
