import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixedconv import Params, solve  # noqa: E402

# Independent RK4 + bisection values (tests/oracle.py), frozen.
ORACLE_CONVEX = 0.7274047077371506    # lam=1, alpha=0, beta=0.5
ORACLE_CONCAVE = -1.3717440481123049  # lam=2, alpha=0, beta=1.5
ORACLE_BLASIUS = 0.41356076624651905  # lam=0, alpha=0, beta=0.3


@pytest.fixture(scope="session")
def convex_params():
    return Params(1.0, 0.0, 0.5)


@pytest.fixture(scope="session")
def concave_params():
    return Params(2.0, 0.0, 1.5)


@pytest.fixture(scope="session")
def convex_result(convex_params):
    return solve(convex_params)


@pytest.fixture(scope="session")
def concave_result(concave_params):
    return solve(concave_params)


@pytest.fixture(scope="session")
def blasius_result():
    return solve(Params(0.0, 0.0, 0.3, allow_lambda_zero=True))
