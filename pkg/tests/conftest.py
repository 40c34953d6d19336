import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from prandtl_lab.grid import GridSpec, build_grid  # noqa: E402
from prandtl_lab.norms import NormParams  # noqa: E402
from prandtl_lab.prandtl import make_standard_datum, make_state  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return NormParams()


@pytest.fixture(scope="session")
def std_grid():
    return build_grid(GridSpec(32, 256, 30.0, grading="exponential", beta=4.0))


@pytest.fixture(scope="session")
def std_datum(std_grid, params):
    return make_standard_datum(std_grid, params)


@pytest.fixture(scope="session")
def std_state(std_grid, std_datum, params):
    return make_state(std_grid, std_datum.omega0, std_datum.U0, 0.1, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE[number] = (name, bool(ok), detail)
        print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
