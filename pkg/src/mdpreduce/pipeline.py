"""End-to-end reductions: certify, transform, solve, lift, verify."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounding import BoundReport, compute_mu, compute_mu_ell
from .core import FiniteMdp, ModelError, ensure_valid
from .solve import SolveReport, acoe_residual, dcoe_residual, solve, tcoe_residual
from .transform import (DiscountedProblem, LiftedAverageSolution, hv_transform,
                        hvag_transform, lift_average_solution, lift_total_value)


class CertificationError(RuntimeError):
    def __init__(self, report: BoundReport):
        super().__init__(report.message)
        self.report = report


@dataclass(frozen=True)
class TotalCostSolution:
    value: np.ndarray
    policy: np.ndarray
    bound: BoundReport
    problem: DiscountedProblem
    solve_report: SolveReport
    tcoe: float
    dcoe: tuple


@dataclass(frozen=True)
class AverageCostSolution:
    lifted: LiftedAverageSolution
    policy: np.ndarray
    bound: BoundReport
    problem: DiscountedProblem
    solve_report: SolveReport
    acoe: float
    dcoe: tuple

    @property
    def w(self) -> float:
        return self.lifted.w

    @property
    def h(self) -> np.ndarray:
        return self.lifted.h


def reduce_total(m: FiniteMdp, V=None, beta=None, tol=1e-10, method="policy_iteration",
                 bound_tol=None) -> TotalCostSolution:
    """Minimal total cost of a transient model through the HV rewrite."""
    ensure_valid(m)
    bound = compute_mu(m, V, tol if bound_tol is None else bound_tol, keep_trace=False)
    if not bound.certified:
        raise CertificationError(bound)
    dp = hv_transform(m, bound, beta)
    rep = solve(dp, method, tol)
    v = lift_total_value(dp, rep.value)
    policy = rep.greedy_policy[:m.n_states]
    return TotalCostSolution(v, policy, bound, dp, rep, tcoe_residual(m, v),
                             dcoe_residual(dp, rep.value, rep.greedy_policy))


def reduce_average(m: FiniteMdp, ell, beta=None, tol=1e-10, method="policy_iteration",
                   bound_tol=None) -> AverageCostSolution:
    """Optimal average cost and bias of a stochastic model through HV-AG.

    Refuses kernels that are not row-stochastic: the optimality transfer
    to the original model is asserted only for transition probabilities
    with bounded costs (automatic on finite models).
    """
    ensure_valid(m)
    if not m.is_stochastic():
        raise ModelError("average-cost reduction needs a row-stochastic kernel")
    bound = compute_mu_ell(m, ell, tol if bound_tol is None else bound_tol, keep_trace=False)
    if not bound.certified:
        raise CertificationError(bound)
    dp = hvag_transform(m, ell, bound, beta)
    rep = solve(dp, method, tol)
    lifted = lift_average_solution(dp, rep.value)
    policy = rep.greedy_policy[:m.n_states]
    return AverageCostSolution(lifted, policy, bound, dp, rep,
                               acoe_residual(m, lifted.w, lifted.h),
                               dcoe_residual(dp, rep.value, rep.greedy_policy))
