"""The frozen reference values are reproducible from the independent oracle."""
import pytest

from conftest import ORACLE_BLASIUS, ORACLE_CONCAVE, ORACLE_CONVEX

pytest.importorskip("numba")
from oracle import oracle_gamma  # noqa: E402


@pytest.mark.parametrize("args,bracket,frozen", [
    ((1.0, 0.0, 0.5), (0.0, 2.2), ORACLE_CONVEX),
    ((0.0, 0.0, 0.3), (0.0, 2.0), ORACLE_BLASIUS),
    ((2.0, 0.0, 1.5), (-4.0, 0.0), ORACLE_CONCAVE),
])
def test_oracle_reproduces_frozen_values(args, bracket, frozen):
    g = oracle_gamma(*args, *bracket)
    assert g == pytest.approx(frozen, abs=1e-8)


def test_solver_agrees_with_live_oracle(convex_result):
    g = oracle_gamma(1.0, 0.0, 0.5, 0.0, 2.2)
    assert abs(convex_result.gamma_star - g) <= 1e-5
