import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mdpreduce.bounding import (WeightFunction, check_assumption_HT, check_assumption_T,
                                compute_mu, compute_mu_ell, contraction_diagnostics, v_norm)
from mdpreduce.core import FiniteMdp, solve_policy_system
from mdpreduce.models import GOLDEN_ELL, remark1_closed_form
from mdpreduce.oracle import enumerate_policies, random_recurrent_mdp, random_transient_mdp


def empty_kernel(n=3):
    return FiniteMdp.from_dense(np.zeros((n, 2, n)), np.ones((n, 2)))


def self_loop():
    return FiniteMdp.from_rows(["x"], [["a"]], [[{"x": 1.0}]], [[1.0]])


def test_v_norm():
    V = WeightFunction(np.array([1.0, 2.0]))
    assert v_norm(np.zeros(2), V) == 0
    assert v_norm(V.values, V) == 1
    assert v_norm([8 / 3, 10 / 3], np.ones(2)) == 10 / 3


def test_weight_rejects_small_entries():
    with pytest.raises(ValueError):
        WeightFunction([1.0, 0.5])


def test_mu_fix_a(fix_a):
    rep = compute_mu(fix_a, tol=1e-12)
    assert rep.certified
    assert_allclose(rep.weight.values, [11 / 6, 5 / 3], rtol=1e-11)
    assert rep.k_hat == pytest.approx(11 / 6, rel=1e-11)
    assert rep.residual <= 1e-12


def test_mu_empty_kernel():
    V = WeightFunction(np.array([1.0, 3.0, 2.0]))
    rep = compute_mu(empty_kernel(), V)
    assert_allclose(rep.weight.values, V.values)
    assert 1.0 <= rep.k_hat <= 1.0 + 1e-9


def test_mu_diverges():
    rep = compute_mu(self_loop())
    assert not rep.certified
    assert "Assumption T appears violated" in rep.message
    assert rep.weight is None


def test_mu_hits_cap():
    # geometric growth: mass 2 on the self-loop blows past the cap
    m = FiniteMdp.from_rows(["x"], [["a"]], [[{"x": 2.0}]], [[1.0]])
    rep = compute_mu(m)
    assert not rep.certified and "exceed" in rep.message


def test_check_t_fix_a(fix_a):
    assert check_assumption_T(fix_a, None, 2.0).holds
    assert not check_assumption_T(fix_a, None, 1.5).holds
    assert check_assumption_T(empty_kernel(), None, 1.0 + 1e-9).holds
    with pytest.raises(ValueError):
        check_assumption_T(fix_a, None, 0.5)


def test_mu_properties_random(rng):
    for _ in range(40):
        m = random_transient_mdp(rng)
        V = WeightFunction(1.0 + rng.random(m.n_states) * 3)
        rep = compute_mu(m, V)
        assert rep.certified
        mu = rep.weight.values
        tr = rep.trace
        # monotone from u_1 on, sandwich, supersolution
        assert np.all(np.diff(tr[1:], axis=0) >= 0)
        assert np.all(tr[1] >= V.values)
        assert np.all(V.values <= mu) and np.all(mu <= rep.k_hat * V.values)
        lhs = V.values[m.state_of_row] + (m.dense_kernel() @ mu)
        assert np.all(lhs <= mu[m.state_of_row] + 1e-12)
        # largest weighted occupation over stationary policies
        best = np.max([solve_policy_system(m, phi, V.values)
                       for phi in enumerate_policies(m)], axis=0)
        assert_allclose(mu, best, rtol=0, atol=1e-8)


def test_mu_ell_remark1(fix_r1):
    rep = compute_mu_ell(fix_r1, "ell", tol=1e-12)
    assert rep.certified
    assert_allclose(rep.weight.values, remark1_closed_form([0.2, 0.4, 0.6]), atol=1e-10)
    assert rep.weight.values[2] == pytest.approx(1 / 0.6, abs=1e-10)
    assert rep.weight.values[-1] == pytest.approx((math.sqrt(5) + 1) / 2, abs=1e-10)
    assert rep.k_without_ell == pytest.approx(2.5, rel=1e-9)


def test_mu_ell_all_mass_to_ell():
    q = np.zeros((3, 1, 3))
    q[:, 0, 0] = 1.0
    rep = compute_mu_ell(FiniteMdp.from_dense(q, np.ones((3, 1))), 0)
    assert_allclose(rep.weight.values, [1, 1, 1])


def test_mu_ell_diverges():
    m = FiniteMdp.from_rows(["l", "x"], [["a"], ["a", "b"]],
                            [[{"x": 1.0}], [{"x": 1.0}, {"l": 1.0}]], [[0], [1, 1]])
    rep = compute_mu_ell(m, "l")
    assert not rep.certified
    assert "Assumption HT appears violated for this ell" in rep.message


def test_check_ht_remark1(fix_r1):
    assert check_assumption_HT(fix_r1, "ell", (math.sqrt(5) + 3) / 2).holds
    assert not check_assumption_HT(fix_r1, "ell", 1.5).holds


def test_mu_ell_matches_policy_enumeration(rng):
    done = 0
    while done < 30:
        m = random_recurrent_mdp(rng)
        rep = compute_mu_ell(m, 0)
        if not rep.certified:
            continue
        done += 1
        taboo = [solve_policy_system(m, phi, np.ones(m.n_states), taboo=0)
                 for phi in enumerate_policies(m)]
        best = np.max(taboo, axis=0)
        assert_allclose(rep.weight.values, best, rtol=1e-10, atol=1e-8)


def test_contraction_fix_a(fix_a):
    rep = compute_mu(fix_a, tol=1e-12)
    cd = contraction_diagnostics(rep.trace, rep.V, rep.k_hat)
    assert cd.certified
    assert cd.bound == pytest.approx(5 / 11, rel=1e-10)
    assert np.nanmax(cd.ratios) <= 5 / 11 + 1e-9
    # the plain V-norm ratio of the first step exceeds (K-1)/K
    assert cd.v_ratios[0] == pytest.approx(0.5)


def test_contraction_empty_kernel():
    rep = compute_mu(empty_kernel())
    tr = np.vstack([rep.trace, rep.trace[-1]])
    cd = contraction_diagnostics(tr, rep.V, rep.k_hat)
    assert cd.ratios[0] == 0.0


def test_contraction_remark1(fix_r1):
    rep = compute_mu_ell(fix_r1, "ell")
    cd = contraction_diagnostics(rep.trace, rep.V, rep.k_hat)
    assert cd.certified and cd.envelope_ok
    assert np.nanmax(cd.ratios) <= 1 - 1 / rep.k_hat + 1e-9


def test_contraction_needs_three_iterates():
    with pytest.raises(ValueError):
        contraction_diagnostics(np.zeros((2, 1)), np.ones(1), 2.0)


def test_inventory_mu_ell_exact(fix_inv_mdp):
    # worst case always orders 2; 0_L moves like stock 0, so it shares its value
    rep = compute_mu_ell(fix_inv_mdp, "0_L")
    assert rep.certified
    assert_allclose(rep.weight.values, [871.25, 1123.75, 1196.25, 1216.25, 1221.25, 871.25],
                    rtol=1e-10)
    assert rep.k_hat == pytest.approx(1221.25, rel=1e-9)


def test_golden_constant():
    assert GOLDEN_ELL == pytest.approx(0.6180339887498949)
