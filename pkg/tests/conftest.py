import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curvlab import riemann as rg
from curvlab import scenario
from curvlab.domain import PolytopeDomain

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CUBE_FACES = [f"{sg}x{j} - 1" for j in (1, 2, 3) for sg in ("", "-")]
CRITERIA = {}


def record(number: int, passed: bool, detail: str) -> bool:
    """Store an acceptance verdict; printed in the terminal summary."""
    CRITERIA[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cube():
    return PolytopeDomain.from_strings(CUBE_FACES, 3, [0.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def sphere():
    return PolytopeDomain.from_strings(["(x1^2 + x2^2 + x3^2 - 1)/2"], 3, [0.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def curved():
    return scenario.load_scenario("curved-convex").domain


@pytest.fixture(scope="session")
def conformal_cube():
    return scenario.load_scenario("conformal-cube").domain


def conformal(d, expr):
    from curvlab import dsl

    return d.with_metric(rg.MetricField.conformal(dsl.parse(expr, d.n), d.n, d.params))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
