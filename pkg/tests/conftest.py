"""Shared fixtures: laws tuned to mean 2 with parameters pinned offline.

The pinned constants were produced by high-precision (mpmath, 30+ digit)
root finding on the exact moment formulas before the library was built;
tests treat them as frozen oracles.
"""

import pytest

from gwtails import offspring as off

# tuned so the offspring mean is 2 to ~1e-12 (high-precision bisection)
PARETO2_SCALE = 2.8686521429483802
PARETO3_SCALE = 5.349434072404259
PARETO35_SCALE = 6.5856435528826595
DW03_C = 1.8600771146190408
DW07_C = 0.9426480804917682

# frozen moments at the pinned parameters (mpmath, explicit remainders)
LOGCORR_MEAN = 3.5644961853056825
LOGCORR_XI_LOG_XI = 4.989780252896715
LOGNORMAL_MEAN = 3.646087860987724


@pytest.fixture(scope="session")
def pareto2():
    return off.make_pareto_integer(2.0, PARETO2_SCALE)


@pytest.fixture(scope="session")
def pareto3():
    return off.make_pareto_integer(3.0, PARETO3_SCALE)


@pytest.fixture(scope="session")
def pareto35():
    return off.make_pareto_integer(3.5, PARETO35_SCALE)


@pytest.fixture(scope="session")
def weibull03():
    return off.make_discrete_weibull(0.3, DW03_C)


@pytest.fixture(scope="session")
def weibull07():
    return off.make_discrete_weibull(0.7, DW07_C)


@pytest.fixture(scope="session")
def logcorr():
    return off.make_log_corrected_index_one(2.0, 3)


@pytest.fixture(scope="session")
def lognormal():
    return off.make_lognormal_integer(0.0, 1.5)


@pytest.fixture(scope="session")
def finite_2atom():
    return off.make_finite_support({0: 0.25, 2: 0.75})
