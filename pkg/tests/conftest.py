import numpy as np
import pytest

from robincap.fem import solve
from robincap.geometry import circle, validate_pair
from robincap.mesh import build_annular_mesh
from robincap.radial import ProblemParams


@pytest.fixture(scope="session")
def concentric_pair():
    return validate_pair(circle(1.0), circle(2.0))


@pytest.fixture(scope="session")
def mesh_256(concentric_pair):
    return build_annular_mesh(concentric_pair, 256, 32)


@pytest.fixture(scope="session")
def mesh_64(concentric_pair):
    return build_annular_mesh(concentric_pair, 64, 8)


@pytest.fixture(scope="session")
def plane_p2():
    return ProblemParams(2, 2.0, 1.0)


@pytest.fixture(scope="session")
def solution_256(mesh_256, plane_p2):
    return solve(mesh_256, plane_p2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
