"""Discounted solvers and optimality-equation residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import FiniteMdp, ModelError, check_policy, solve_policy_system, sup_norm
from .transform import DiscountedProblem


@dataclass(frozen=True)
class SolveReport:
    value: np.ndarray
    greedy_policy: np.ndarray
    residual_sup: float
    iterations: int
    beta: float
    converged: bool
    method: str


def _bellman(m: FiniteMdp, scale, v):
    return kernels.sweep(m.row_start, m.indptr, m.indices, m.data, m.cost,
                         float(scale), np.ascontiguousarray(v, dtype=float), False)


def greedy_policy(m: FiniteMdp, v, scale=1.0) -> np.ndarray:
    """Argmin of ``c + scale * Q v`` per state, lowest action index on ties."""
    return _bellman(m, scale, v)[1]


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def value_iteration(dp: DiscountedProblem, tol=1e-10, max_iter=1_000_000) -> SolveReport:
    """Iterate the discounted Bellman operator from zero.

    Stops when ``beta / (1 - beta) * ||v_{n+1} - v_n||`` drops below
    ``tol``, which bounds the sup-norm distance to the fixed point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m, beta = dp.mdp, dp.beta
    v = np.zeros(m.n_states)
    factor = beta / (1.0 - beta)
    converged = False
    n = 0
    while n < max_iter:
        n += 1
        new = _bellman(m, beta, v)[0]
        gap = sup_norm(new - v)
        v = new
        if gap * factor < tol or gap == 0.0:
            converged = True
            break
    tv, policy = _bellman(m, beta, v)
    residual = sup_norm(tv - v)
    _freeze(v, policy)
    return SolveReport(v, policy, residual, n, beta, converged and residual <= tol,
                       "value_iteration")


def policy_iteration(dp: DiscountedProblem, tol=1e-10, max_rounds=None) -> SolveReport:
    """Howard policy iteration with exact evaluation.

    Improvement keeps the incumbent action unless another action is better
    by more than a relative ``1e-13``, which rules out float-induced cycling;
    the reported ``greedy_policy`` is then re-derived from the final value
    with lowest-index tie-breaking.
    """
    m, beta = dp.mdp, dp.beta
    if max_rounds is None:
        max_rounds = m.n_states * int(m.n_actions.max()) + 1
    phi = greedy_policy(m, np.zeros(m.n_states), beta)
    seen = set()
    converged = False
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        v = solve_policy_system(m, phi, m.policy_cost(phi), scale=beta)
        q = m.cost + beta * kernels.row_dot(m.indptr, m.indices, m.data, v)
        best, cand = _bellman(m, beta, v)
        current = q[m.row_start[:-1] + phi]
        slack = 1e-13 * max(1.0, sup_norm(v))
        new = np.where(current <= best + slack, phi, cand)
        if np.array_equal(new, phi):
            converged = True
            break
        key = new.tobytes()
        if key in seen:
            break
        seen.add(key)
        phi = new
    tv, policy = _bellman(m, beta, v)
    residual = sup_norm(tv - v)
    _freeze(v, policy)
    return SolveReport(v, policy, residual, rounds, beta,
                       converged and residual <= tol, "policy_iteration")


def solve(dp: DiscountedProblem, method="policy_iteration", tol=1e-10) -> SolveReport:
    if method == "policy_iteration":
        return policy_iteration(dp, tol)
    if method == "value_iteration":
        return value_iteration(dp, tol)
    raise ValueError(f"unknown method {method!r}")


def dcoe_residual(dp: DiscountedProblem, v, policy) -> tuple:
    """Defect of ``v`` against the discounted optimality equation.

    Returns ``(min-form defect, policy-form defect)``; ``policy`` is
    optimal iff both vanish.
    """
    m = dp.mdp
    v = np.asarray(v, dtype=float)
    phi = check_policy(m, policy)
    tv = _bellman(m, dp.beta, v)[0]
    q = m.cost + dp.beta * kernels.row_dot(m.indptr, m.indices, m.data, v)
    return sup_norm(tv - v), sup_norm(q[m.row_start[:-1] + phi] - v)


def tcoe_residual(m: FiniteMdp, v) -> float:
    """``sup_x |v(x) - min_a [c(x,a) + sum_y v(y) q({y}|x,a)]|``."""
    v = np.asarray(v, dtype=float)
    return sup_norm(_bellman(m, 1.0, v)[0] - v)


def acoe_residual(m: FiniteMdp, w, h) -> float:
    """``sup_x |w + h(x) - min_a [c(x,a) + sum_y h(y) q({y}|x,a)]|``."""
    if not m.is_stochastic():
        raise ModelError("average-cost optimality equation needs a stochastic kernel")
    h = np.asarray(h, dtype=float)
    return sup_norm(_bellman(m, 1.0, h)[0] - (w + h))
