import math

import numpy as np
import pytest

from mixedconv import IntegratorConfig, ToleranceNotMet, Params, ShootConfig, VerifyConfig, run_verification, solve
from mixedconv.model import FP, FPP, F
from mixedconv.verify import (check_identities, check_lemma_vanish, check_partition,
                              check_v_equivalence, integrate_v)


@pytest.mark.parametrize("lam,alpha", [(1.0, 0.0), (3.0, -2.0), (0.5, 1.0)])
def test_line_start_is_invariant(lam, alpha):
    c = check_lemma_vanish(Params(lam, alpha, 0.5))
    assert c.status == "Pass" and c.metric <= 1e-10


def test_perturbed_control_run_departs():
    c = check_lemma_vanish(Params(1.0, 0.0, 0.5), gamma0=1e-8)
    assert c.status == "Skipped"
    assert c.metric > 1e-8


def test_v_equivalence_convex(convex_result, convex_params):
    c = check_v_equivalence(convex_result, convex_params)
    assert c.status == "Pass" and c.metric <= 1e-4 and not c.extended


def test_v_equivalence_concave_is_extended(concave_result, concave_params):
    c = check_v_equivalence(concave_result, concave_params)
    assert c.name == "v_equivalence_extended" and c.extended
    assert c.status == "Pass"


def test_v_derivative_matches_profile(convex_result, convex_params):
    """v'(f'^2) = 1 / (2 f'') along the profile."""
    sol = integrate_v(convex_params, convex_result.gamma_star, 1 - 1e-3)
    y = convex_result.profile.y
    sel = (y[:, FP] ** 2 <= 1 - 1e-3) & (y[:, FPP] > 1e-2)
    vp = sol.sol(y[sel, FP] ** 2)[1]
    np.testing.assert_allclose(vp, 1 / (2 * y[sel, FPP]), rtol=1e-6)


def test_v_gap_shrinks_with_tolerance(convex_result, convex_params):
    loose = check_v_equivalence(convex_result, convex_params, VerifyConfig(v_rtol=1e-6, v_atol=1e-8))
    tight = check_v_equivalence(convex_result, convex_params)
    assert tight.metric < loose.metric


def test_identities_pass(convex_result, concave_result):
    for r in (convex_result, concave_result):
        i1, ex = check_identities(r)
        assert i1.status == ex.status == "Pass"
        assert i1.metric <= 1e-8 and ex.metric <= 1e-8


def test_exp_identity_skipped_under_tiny_cap(convex_result):
    cfg = VerifyConfig(shoot=ShootConfig(integrator=IntegratorConfig(exp_cap=1e-300)))
    _, ex = check_identities(convex_result, cfg)
    assert ex.status == "Skipped" and math.isnan(ex.metric)


def test_identities_fail_on_loose_profile(convex_params):
    cfg = ShootConfig(integrator=IntegratorConfig(rtol=1e-3, atol=1e-3), gamma_atol=1e-6)
    try:
        r = solve(convex_params, cfg)
    except ToleranceNotMet as exc:  # the loose profile is usually not certified either
        r = exc.result
    i1, _ = check_identities(r)
    assert i1.status == "Fail"


@pytest.mark.parametrize("fixture", ["convex_result", "concave_result"])
def test_partition_single_threshold(fixture, request):
    r = request.getfixturevalue(fixture)
    c = check_partition(r.params, n_grid=10, gamma_star=r.gamma_star)
    assert c.status == "Pass", c.detail
    assert c.metric <= 1e-12


def test_partition_rejects_coarse_grid(convex_params):
    with pytest.raises(ValueError):
        check_partition(convex_params, n_grid=5)


def test_partition_flags_misplaced_gamma(convex_params):
    c = check_partition(convex_params, n_grid=10, gamma_star=5.0)
    assert c.status == "Fail" and c.metric > 1


def test_full_report(convex_result):
    rep = run_verification(convex_result, VerifyConfig(n_grid=10))
    assert rep.ok
    names = [c.name for c in rep.checks]
    assert names == ["lemma_vanish", "identity_i1", "identity_exp", "v_equivalence",
                     "partition", "tail_limit"]
    d = rep.to_dict()
    assert d["params"] == {"lambda": 1.0, "alpha": 0.0, "beta": 0.5} and d["ok"]


def test_report_is_deterministic(convex_result):
    a = run_verification(convex_result, VerifyConfig(n_grid=10)).to_dict()
    b = run_verification(convex_result, VerifyConfig(n_grid=10)).to_dict()
    assert a == b


def test_linear_report():
    r = solve(Params(1.0, 0.0, 1.0))
    rep = run_verification(r, VerifyConfig(n_grid=10))
    assert rep.ok
    assert rep.get("v_equivalence").status == "Skipped"
    assert rep.get("partition").status == "Skipped"
    assert rep.get("lemma_vanish").status == "Pass"
    with pytest.raises(KeyError):
        rep.get("nope")


def test_parallel_partition_matches_serial(convex_params):
    a = check_partition(convex_params, n_grid=10)
    b = check_partition(convex_params, n_grid=10, cfg=VerifyConfig(workers=2))
    assert a.detail == b.detail and a.status == b.status == "Pass"
