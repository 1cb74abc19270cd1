"""Brute-force ground truth for small models.

Every deterministic stationary policy is enumerated and evaluated exactly
by a linear solve, so results here share no code path with the fixed-point
iterations, rewrites and discounted solvers they are used to check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (FiniteMdp, ModelError, NotTransientError, check_policy,
                   policy_total_cost, solve_policy_system)

DEFAULT_CAP = 10**6


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    best_policy: np.ndarray
    best_value: np.ndarray | float
    policies_enumerated: int
    per_policy: list | None = None
    consistent: bool = True


def policy_count(m: FiniteMdp) -> int:
    return int(np.prod([int(k) for k in m.n_actions], dtype=object))


def enumerate_policies(m: FiniteMdp, cap=DEFAULT_CAP):
    """Yield every stationary deterministic policy once, lexicographically."""
    total = policy_count(m)
    if total > cap:
        raise OracleTooLarge(f"instance too large for oracle ({total} policies > cap {cap})")
    for choice in itertools.product(*(range(int(k)) for k in m.n_actions)):
        yield np.array(choice, dtype=np.int64)


def exact_total_cost(m: FiniteMdp, policy) -> np.ndarray:
    return policy_total_cost(m, policy)


def exact_average_cost(m: FiniteMdp, policy, ell) -> float:
    """Renewal-reward average cost: cycle cost over cycle length at ``ell``."""
    if not m.is_stochastic():
        raise ModelError("average cost oracle needs a stochastic kernel")
    phi = check_policy(m, policy)
    ell = m.state_index(ell)
    try:
        cost = solve_policy_system(m, phi, m.policy_cost(phi), taboo=ell)
        time = solve_policy_system(m, phi, np.ones(m.n_states), taboo=ell)
    except NotTransientError:
        raise NotTransientError("ell not reached under this policy") from None
    return float(cost[ell] / time[ell])


def brute_force_optimum(m: FiniteMdp, criterion="total", ell=None, cap=DEFAULT_CAP,
                        keep_table=False) -> OracleResult:
    """Exhaustive minimum over stationary policies.

    ``criterion="total"`` returns the entrywise minimal total cost and the
    first policy attaining it everywhere (``consistent=False`` if none
    does); policies whose cost is infinite count as ``inf``.
    ``criterion="average"`` needs ``ell`` and returns the scalar minimum.
    """
    table = [] if keep_table else None
    count = 0
    if criterion == "total":
        best = np.full(m.n_states, np.inf)
        values = []
        for phi in enumerate_policies(m, cap):
            count += 1
            try:
                v = exact_total_cost(m, phi)
            except NotTransientError:
                v = np.full(m.n_states, np.inf)
            values.append((phi, v))
            best = np.minimum(best, v)
            if keep_table:
                table.append((phi, v))
        scale = np.maximum(1.0, np.abs(np.where(np.isfinite(best), best, 0.0)))
        for phi, v in values:
            if np.all(v <= best + 1e-11 * scale):
                return OracleResult(phi, best, count, table, True)
        return OracleResult(values[0][0], best, count, table, False)
    if criterion == "average":
        if ell is None:
            raise ValueError("average criterion needs ell")
        best, arg = np.inf, None
        for phi in enumerate_policies(m, cap):
            count += 1
            w = exact_average_cost(m, phi, ell)
            if keep_table:
                table.append((phi, w))
            if w < best:
                best, arg = w, phi
        return OracleResult(arg, best, count, table, True)
    raise ValueError(f"unknown criterion {criterion!r}")


# -- seeded random instances ---------------------------------------------
def random_transient_mdp(rng, n_states=None, n_actions=None, max_states=6, max_actions=3):
    """Random sub-stochastic model whose row masses stay below 0.95.

    Any stationary policy then has ``||Q_phi||_inf < 1``, so every policy is
    transient and the instance satisfies the transient assumption with
    ``V = 1``.
    """
    n = n_states or int(rng.integers(1, max_states + 1))
    k = n_actions or int(rng.integers(1, max_actions + 1))
    q = rng.random((n, k, n)) * (rng.random((n, k, n)) < 0.6)
    mass = rng.uniform(0.0, 0.95, size=(n, k))
    sums = q.sum(axis=2)
    q = np.where(sums[..., None] > 0, q / np.where(sums > 0, sums, 1)[..., None], 0.0)
    q *= mass[..., None]
    c = rng.uniform(0.0, 5.0, size=(n, k)) * (rng.random((n, k)) < 0.9)
    return FiniteMdp.from_dense(q, c)


def random_recurrent_mdp(rng, n_states=None, n_actions=None, max_states=6, max_actions=3,
                         ell=0):
    """Random row-stochastic model in which ``ell`` tends to be hit quickly.

    Each row sends a random share (sometimes zero) of its mass to ``ell``;
    the hitting-time assumption is *not* guaranteed and callers certify it.
    """
    n = n_states or int(rng.integers(2, max_states + 1))
    k = n_actions or int(rng.integers(1, max_actions + 1))
    q = rng.random((n, k, n)) * (rng.random((n, k, n)) < 0.7)
    q[..., ell] = 0.0
    sums = q.sum(axis=2)
    q = np.where(sums[..., None] > 0, q / np.where(sums > 0, sums, 1)[..., None], 0.0)
    hit = rng.uniform(0.02, 0.9, size=(n, k)) * (rng.random((n, k)) < 0.85)
    hit = np.where(sums > 0, hit, 1.0)
    q *= (1.0 - hit)[..., None]
    q[..., ell] += hit
    c = rng.uniform(0.0, 5.0, size=(n, k))
    return FiniteMdp.from_dense(q, c)
