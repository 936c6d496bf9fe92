import numpy as np
import pytest

from serrinlab.geometry import build_domain, geometric_summary, make_grids
from serrinlab.torsion import solve

_ACCEPTANCE: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE.append(f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


class Setup:
    """Domain, field, grids and summary bundled for tests."""

    def __init__(self, spec, **orders):
        self.domain = build_domain(spec)
        self.field = solve(self.domain)
        self.grids = make_grids(self.domain, **orders)
        self.summary = geometric_summary(self.domain)


@pytest.fixture(scope="session")
def ellipse21():
    return Setup({"kind": "ellipsoid", "axes": [2, 1]})


@pytest.fixture(scope="session")
def disk():
    return Setup({"kind": "ellipsoid", "axes": [1, 1]})


@pytest.fixture(scope="session")
def fourier4():
    return Setup({"kind": "fourier2d", "cos": [1, 0, 0, 0, 0.1]})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
