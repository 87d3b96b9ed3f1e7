import sys
import numpy as np
import pytest
from hypothesis import settings

from fractal_mra.ifs import cantor_quarter_with_gap, cantor_third, linear_system, nonlinear_example

settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("repro")


@pytest.fixture
def third():
    return cantor_third()


@pytest.fixture
def quarter():
    return cantor_quarter_with_gap()


@pytest.fixture
def nonlinear():
    return nonlinear_example()


@pytest.fixture(params=["third", "quarter", "nonlinear", "five"])
def any_system(request):
    return {
        "third": cantor_third,
        "quarter": cantor_quarter_with_gap,
        "nonlinear": nonlinear_example,
        "five": lambda: linear_system(5, (0, 2, 3)),
    }[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
