import sys

import pytest

from rtescatter import clt_moments, sigma_zero, toeplitz_covariance
from rtescatter.experiments import clt_statistics, rte_replications


class Setup:
    def __init__(self, dim, b, rho):
        self.model = toeplitz_covariance(dim, b)
        self.rho = rho
        self.limit = sigma_zero(self.model, rho)
        self.moments = clt_moments(self.model, self.limit)


@pytest.fixture(scope="session")
def quad_form_setup():
    return Setup(4, 0.7j, 0.5)


@pytest.fixture(scope="session")
def quad_form_stats(quad_form_setup):
    """Studentised quadratic-form statistics, 10^4 replications at n = 4000."""
    s = quad_form_setup
    return clt_statistics(s.model, s.rho, 4000, 10_000, 0, limit=s.limit, moments=s.moments)


@pytest.fixture(scope="session")
def fluctuation_setup():
    return Setup(2, 0.7, 0.5)


@pytest.fixture(scope="session")
def fluctuation_sample(fluctuation_setup):
    """RTE solutions and random equivalents, 2 x 10^4 replications at n = 2000."""
    s = fluctuation_setup
    return rte_replications(s.model, s.rho, 2000, 20_000, 1, tilde_limit=s.limit)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
