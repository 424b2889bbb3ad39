import numpy as np
import pytest

from gapscale import _core

ACCEPTANCE_RESULTS = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["cython", "python"])
def backend(request):
    if request.param == "cython":
        try:
            from gapscale import _kernels  # noqa: F401
        except ImportError:
            pytest.skip("compiled extension not built")
    previous = _core.use_backend(request.param)
    yield request.param
    _core.use_backend(previous)
