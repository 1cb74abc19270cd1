import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mdpreduce.bounding import WeightFunction, compute_mu, compute_mu_ell
from mdpreduce.core import FiniteMdp, ModelError
from mdpreduce.oracle import random_transient_mdp
from mdpreduce.pipeline import reduce_average, reduce_total
from mdpreduce.solve import (acoe_residual, dcoe_residual, greedy_policy, policy_iteration,
                             solve, tcoe_residual, value_iteration)
from mdpreduce.transform import as_discounted, hv_transform, hvag_transform


@pytest.fixture
def hv_a(fix_a):
    return hv_transform(fix_a, WeightFunction([11 / 6, 5 / 3], "mu"), 5 / 11)


def test_vi_fix_a(hv_a):
    rep = value_iteration(hv_a, 1e-12)
    assert rep.converged
    assert_allclose(rep.value, [16 / 11, 2, 0], atol=1e-8)
    assert rep.value[-1] == 0


def test_pi_matches_vi(hv_a):
    a = value_iteration(hv_a, 1e-12)
    b = policy_iteration(hv_a, 1e-12)
    assert_allclose(a.value, b.value, atol=1e-10)
    assert_array_equal(a.greedy_policy, b.greedy_policy)
    assert b.iterations == 1


def test_zero_costs():
    m = FiniteMdp.from_dense(np.full((2, 2, 2), 0.5), np.zeros((2, 2)))
    rep = value_iteration(as_discounted(m, 0.9))
    assert rep.iterations == 1 and np.all(rep.value == 0)


def test_single_step_cost():
    m = FiniteMdp.from_rows(["x"], [["a"]], [[{}]], [[1.0]])
    dp = hv_transform(m, WeightFunction([1.0], "mu"), 0.5)
    assert_allclose(value_iteration(dp).value, [1.0, 0.0])


def test_unconverged_flag(hv_a):
    rep = value_iteration(hv_a, 1e-12, max_iter=2)
    assert not rep.converged


def test_vi_error_bound_on_every_run(rng):
    for _ in range(20):
        m = random_transient_mdp(rng)
        dp = hv_transform(m, compute_mu(m, keep_trace=False))
        tol = 1e-9
        vi = value_iteration(dp, tol)
        pi = policy_iteration(dp, tol)
        assert np.max(np.abs(vi.value - pi.value)) <= 2 * tol
        assert_array_equal(greedy_policy(dp.mdp, pi.value, dp.beta), pi.greedy_policy)


def test_inventory_methods_agree(fix_inv_mdp):
    rep = compute_mu_ell(fix_inv_mdp, "0_L", keep_trace=False)
    dp = hvag_transform(fix_inv_mdp, "0_L", rep)
    vi = value_iteration(dp, 1e-10)
    pi = policy_iteration(dp, 1e-10)
    assert vi.converged and pi.converged
    assert np.max(np.abs(vi.value - pi.value)) <= 1e-8


def test_dcoe_examples(hv_a):
    rep = value_iteration(hv_a, 1e-12)
    r_min, r_phi = dcoe_residual(hv_a, rep.value, rep.greedy_policy)
    assert r_min <= 1e-10 and r_phi <= 1e-10
    # v = 0: the min-form defect is the smallest scaled cost in some row
    r0, _ = dcoe_residual(hv_a, np.zeros(3), rep.greedy_policy)
    assert r0 >= 1.0 * (1 / (11 / 6)) - 1e-12


def test_dcoe_suboptimal_policy():
    # action 1 costs more and leads to the same place
    m = FiniteMdp.from_rows(["x", "y"], [["a", "b"], ["a"]],
                            [[{"y": 1.0}, {"y": 1.0}], [{"y": 1.0}]], [[1.0, 2.0], [0.0]])
    dp = as_discounted(m, 0.9)
    rep = policy_iteration(dp)
    assert_array_equal(rep.greedy_policy, [0, 0])
    r_min, r_phi = dcoe_residual(dp, rep.value, [1, 0])
    assert r_min <= 1e-12 and r_phi == pytest.approx(1.0)


def test_tcoe_examples(fix_a):
    sol = reduce_total(fix_a)
    assert sol.tcoe <= 1e-8
    z = FiniteMdp.from_rows(["x"], [["a"]], [[{}]], [[0.0]])
    assert tcoe_residual(z, [0.0]) == 0
    bumped = sol.value + np.array([1.0, 0.0])
    assert tcoe_residual(fix_a, bumped) >= 0.5


def test_acoe_examples(fix_r1, fix_a):
    m = fix_r1
    assert acoe_residual(m, 1.0, np.zeros(5)) == pytest.approx(0.0, abs=1e-15)
    assert acoe_residual(m, 1.25, np.zeros(5)) == pytest.approx(0.25)
    with pytest.raises(ModelError):
        acoe_residual(fix_a, 0.0, np.zeros(2))


def test_remark1_average_cost_is_one(fix_r1):
    sol = reduce_average(fix_r1, "ell")
    assert sol.w == pytest.approx(1.0, abs=1e-10)
    assert sol.acoe <= 1e-8 and sol.h[4] == 0


def test_solve_dispatch(hv_a):
    assert solve(hv_a, "value_iteration").method == "value_iteration"
    with pytest.raises(ValueError):
        solve(hv_a, "simplex")
