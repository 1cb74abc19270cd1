"""Rewrites of undiscounted models into discounted ones, and the way back.

Both rewrites append one cost-free absorbing state at index ``n_states``
(so original indices survive), divide costs by the weight, tilt the
kernel by the weight ratio ``w(y) / (beta * w(x))`` and send the leftover
probability to the new state.  The average-cost variant additionally
routes the surplus ``w(x) - 1 - sum_{y != ell} w(y) q(y)`` to ``ell``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounding import BoundReport, WeightFunction
from .core import FiniteMdp, ModelError, canonical_csr, ensure_valid

CLAMP = 1e-12
MAX_BETA = 1.0 - 1e-6
ABSORB_STATE = "__absorb__"
ABSORB_ACTION = "__stay__"


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class DiscountedProblem:
    mdp: FiniteMdp
    beta: float
    absorbing_state: int | None
    weight_used: WeightFunction | None
    kind: str
    source: FiniteMdp | None = None
    marked_ell: int | None = None
    k_hat: float | None = None
    max_row_defect: float = 0.0

    @property
    def n_original(self) -> int:
        return self.mdp.n_states - (self.absorbing_state is not None)


def _unpack(weight, n, role):
    if isinstance(weight, BoundReport):
        if not weight.certified or weight.weight is None:
            raise TransformError(f"weight not certified: {weight.message}")
        if weight.weight.role != role:
            raise TransformError(f"expected a {role} weight, got {weight.weight.role}")
        w, k_hat = weight.weight, weight.k_hat
    else:
        w = weight if isinstance(weight, WeightFunction) else WeightFunction(weight, role)
        k_hat = None
    if len(w) != n:
        raise TransformError("weight has the wrong length")
    return w, k_hat


def _pick_beta(beta, k_hat, what):
    if beta is None:
        if k_hat is None:
            raise TransformError("beta is required when the weight carries no K estimate")
        beta = (k_hat - 1.0) / k_hat
    beta = float(beta)
    if not 0.0 <= beta <= MAX_BETA:
        raise TransformError(f"beta must lie in [0, {MAX_BETA}]")
    if k_hat is not None and beta < (k_hat - 1.0) / k_hat - CLAMP:
        raise TransformError(f"beta below ({what}-1)/{what} = {(k_hat - 1) / k_hat:.17g}")
    if beta == 0.0:
        raise TransformError("beta must be positive")
    return beta


def _clamp_rows(entry_row, data, n_rows, msgs):
    """Clamp float noise, reject real negatives, renormalize rows.

    ``msgs`` maps an entry mask to the error raised when it holds a mass
    below ``-CLAMP``.
    """
    for mask, msg in msgs:
        bad = mask & (data < -CLAMP)
        if np.any(bad):
            raise TransformError(f"{msg} (mass {data[bad].min():.3g})")
    data = np.where(data < 0.0, 0.0, data)
    sums = np.bincount(entry_row, weights=data, minlength=n_rows)
    defect = float(np.abs(sums - 1.0).max(initial=0.0))
    return data / sums[entry_row], defect


def _assemble(m, weight, beta, extra_rows, extra_cols, extra_data, kind, ell, k_hat,
              keep_ell_mass):
    """Common tail: tilt, append the absorbing state, clamp, build."""
    n, R = m.n_states, m.n_rows
    mu = weight.values
    er = m.entry_row
    src = mu[m.state_of_row]
    keep = np.ones(m.indices.shape, bool) if keep_ell_mass else m.indices != ell
    tilted = mu[m.indices[keep]] * m.data[keep] / (beta * src[er[keep]])

    rows = np.concatenate((er[keep], extra_rows, [R]))
    cols = np.concatenate((m.indices[keep], extra_cols, [n]))
    data = np.concatenate((tilted, extra_data, [1.0]))
    tags = np.concatenate((np.zeros(tilted.size, int), _tags(extra_cols, ell), [0]))
    msgs = [(tags == 1, "mu violates mu >= V + Q mu; recompute mu"),
            (tags == 2, "mu_ell violates mu_ell >= 1 + (taboo Q) mu_ell"),
            (tags == 3, "beta below (K_ell-1)/K_ell")]
    data, defect = _clamp_rows(rows, data, R + 1, msgs)
    indptr, indices, data = canonical_csr(rows, cols, data, R + 1, n + 1)
    cost = np.concatenate((m.cost / src, [0.0]))
    out = FiniteMdp(m.states + (ABSORB_STATE,), m.actions + ((ABSORB_ACTION,),),
                    None, indptr, indices, data, cost)
    return DiscountedProblem(out, beta, n, weight, kind, m, ell, k_hat, defect)


def _tags(cols, ell):
    # 1: HV absorbing mass, 2: mass to ell, 3: HV-AG absorbing mass
    if ell is None:
        return np.ones(cols.size, int)
    return np.where(cols == ell, 2, 3)


def hv_transform(m: FiniteMdp, mu, beta=None) -> DiscountedProblem:
    """Discounted model equivalent to the total-cost model ``m``.

    ``mu`` is a certified :class:`BoundReport` from ``compute_mu`` (then
    ``beta`` defaults to ``(K_hat - 1) / K_hat``) or an explicit weight
    vector together with ``beta``.
    """
    ensure_valid(m)
    weight, k_hat = _unpack(mu, m.n_states, "mu")
    beta = _pick_beta(beta, k_hat, "K")
    w = weight.values
    integral = np.bincount(m.entry_row, weights=w[m.indices] * m.data, minlength=m.n_rows)
    to_absorb = 1.0 - integral / (beta * w[m.state_of_row])
    R = m.n_rows
    return _assemble(m, weight, beta, np.arange(R), np.full(R, m.n_states), to_absorb,
                     "HV", None, k_hat, keep_ell_mass=True)


def hvag_transform(m: FiniteMdp, ell, mu_ell, beta=None) -> DiscountedProblem:
    """Discounted model whose value at ``ell`` is the optimal average cost."""
    ensure_valid(m)
    ell = m.state_index(ell)
    weight, k_hat = _unpack(mu_ell, m.n_states, "mu_ell")
    if isinstance(mu_ell, BoundReport) and mu_ell.ell != ell:
        raise TransformError("mu_ell was computed for a different ell")
    beta = _pick_beta(beta, k_hat, "K_ell")
    w = weight.values
    off = np.where(m.indices == ell, 0.0, w[m.indices] * m.data)
    integral = np.bincount(m.entry_row, weights=off, minlength=m.n_rows)
    src = w[m.state_of_row]
    to_ell = (src - 1.0 - integral) / (beta * src)
    to_absorb = 1.0 - (src - 1.0) / (beta * src)
    R = m.n_rows
    rows = np.concatenate((np.arange(R), np.arange(R)))
    cols = np.concatenate((np.full(R, ell), np.full(R, m.n_states)))
    return _assemble(m, weight, beta, rows, cols, np.concatenate((to_ell, to_absorb)),
                     "HVAG", ell, k_hat, keep_ell_mass=False)


def lift_total_value(dp: DiscountedProblem, v_tilde, tol=1e-9) -> np.ndarray:
    """``v(x) = mu(x) * v_tilde(x)`` on the original states."""
    if dp.kind != "HV":
        raise TransformError("lift_total_value needs an HV problem")
    v_tilde = np.asarray(v_tilde, dtype=float)
    if v_tilde.shape != (dp.mdp.n_states,):
        raise TransformError("value vector has the wrong length")
    if abs(v_tilde[dp.absorbing_state]) > tol:
        raise TransformError("absorbing state has nonzero value")
    return dp.weight_used.values * v_tilde[:dp.absorbing_state]


@dataclass(frozen=True)
class LiftedAverageSolution:
    w: float
    h: np.ndarray
    source: DiscountedProblem


def lift_average_solution(dp: DiscountedProblem, v_bar) -> LiftedAverageSolution:
    """``w = v_bar(ell)`` and ``h(x) = mu_ell(x) * (v_bar(x) - v_bar(ell))``."""
    if dp.kind != "HVAG" or dp.marked_ell is None:
        raise TransformError("lift_average_solution needs an HV-AG problem")
    v_bar = np.asarray(v_bar, dtype=float)
    if v_bar.shape != (dp.mdp.n_states,):
        raise TransformError("value vector has the wrong length")
    ell = dp.marked_ell
    w = float(v_bar[ell])
    h = dp.weight_used.values * (v_bar[:dp.absorbing_state] - w)
    h[ell] = 0.0
    h.flags.writeable = False
    return LiftedAverageSolution(w, h, dp)


def as_discounted(m: FiniteMdp, beta) -> DiscountedProblem:
    """Wrap a row-stochastic model as a plain discounted problem."""
    ensure_valid(m)
    if not m.is_stochastic():
        raise ModelError("a discounted model needs row-stochastic transitions")
    beta = float(beta)
    if not 0.0 <= beta < 1.0:
        raise TransformError("beta must lie in [0, 1)")
    return DiscountedProblem(m, beta, None, None, "DISCOUNTED", m)
