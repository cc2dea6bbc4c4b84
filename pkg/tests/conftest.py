import numpy as np
import pytest

from reluclosure.geometry import BoxDomain, HalfSpace
from reluclosure.landscape import lp_loss, make_target
from reluclosure.quadrature import Measure
from reluclosure.response import GeneralizedResponse, Summand

_CRITERIA: dict[int, tuple[str, str]] = {}


def f4_response() -> GeneralizedResponse:
    """Two jump summands with opposing normals on the square [-1, 1]^2."""
    return GeneralizedResponse(
        [0.0, 0.0], 0.0,
        (Summand(HalfSpace([1.0, 0.0], -0.3), [0.0, 0.0], 1.0, 2),
         Summand(HalfSpace([-1.0, 0.0], -0.3), [0.0, 0.0], 0.5, 2)),
        0, "b")


def square(dim: int = 2) -> Measure:
    return Measure.uniform(BoxDomain.cube(dim))


def f1_loss():
    return lp_loss(make_target({"kind": "abs"}, 1), 2)


@pytest.fixture
def f4():
    return f4_response()


@pytest.fixture
def m1():
    return square(1)


@pytest.fixture
def m2():
    return square(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion at the end of the run


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n = mark.args[0]
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    prev = _CRITERIA.get(n)
    if prev is None or prev[0] == "PASS":
        _CRITERIA[n] = (status, detail if rep.passed else (detail or str(rep.longrepr).splitlines()[-1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
