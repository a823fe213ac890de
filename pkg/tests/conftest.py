import numpy as np
import pytest

from greeklab.gaw import GridSpec, default_field
from greeklab.market import basket_problem
from greeklab.montecarlo import mc_benchmark
from greeklab.stencil import central_diff_coefficients


@pytest.fixture(scope="session")
def basket():
    return basket_problem()


@pytest.fixture(scope="session")
def basket_bench(basket):
    return mc_benchmark(basket)


@pytest.fixture(scope="session")
def basket_grid():
    return GridSpec(4, 4, 0.25)


@pytest.fixture(scope="session")
def basket_field(basket, basket_grid):
    # Chebyshev surface over the m=1, l=0.25 stencil box, 10^6 CRN paths
    return default_field(basket, basket_grid, central_diff_coefficients(1))


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
