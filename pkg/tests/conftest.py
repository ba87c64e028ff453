"""Shared fixtures: cached pipelines and small meshes for the oracle tests."""

import numpy as np
import pytest

from fsirom.meshfe import build_mesh, build_system
from fsirom.problem import default_params

from _pipeline import Pipeline

ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """One pass/fail line per acceptance criterion, shown in the summary."""
    status = "PASS" if ok else "FAIL"
    line = f"criterion {number:2d}: {status} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_pipe():
    """Offline chain of the fast 24x2 configuration (cached on disk)."""
    return Pipeline("small")


@pytest.fixture(scope="session")
def table1_pipe():
    """Offline chain of the full-size reference configuration."""
    return Pipeline("table1")


@pytest.fixture(scope="session")
def coarse_pipe():
    """Half-resolution variant of the reference configuration."""
    return Pipeline("coarse")


@pytest.fixture(scope="session")
def fs_tiny():
    """A 4x2 channel system, small enough for dense naive assembly."""
    return build_system(build_mesh(4, 2, 6.0, 0.5))


@pytest.fixture(scope="session")
def fs_odd():
    """A 3x2 system with non-square cells, second shape for the oracles."""
    return build_system(build_mesh(3, 2, 6.0, 0.5))


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
