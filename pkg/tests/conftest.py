import numpy as np
import pytest

from neseek import scenario

# Nash equilibria from the scalar aggregate closed form
#   sigma = sum(c_i) / (1 + a sum(1/d_i)),  y_i = (p0 - beta_i - a sigma) / d_i,
#   d_i = 2 xi_i + a,  c_i = (p0 - beta_i) / d_i
EXAMPLE1_NE = np.array([9.88739872, 15.14566454, 11.38976038, 12.58868253, 9.59944326, 15.95205695])
EXAMPLE2_NE = np.array([5.98363670, 11.30606117, 7.59956750, 8.39952198, 5.17003398, 7.62299515])


def aggregate_ne(xi, beta, p0, a):
    xi = np.asarray(xi, float)
    beta = np.asarray(beta, float)
    d = 2 * xi + a
    sigma = ((p0 - beta) / d).sum() / (1 + a * (1 / d).sum())
    return (p0 - beta - a * sigma) / d


@pytest.fixture
def ex1():
    return scenario.from_dict(scenario.example1())


@pytest.fixture
def ex1_imperfect():
    return scenario.from_dict(scenario.example1(mode="imperfect"))


@pytest.fixture
def ex2():
    return scenario.from_dict(scenario.example2())


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
