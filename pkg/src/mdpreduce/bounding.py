"""Weight functions for the transient and hitting-time reductions.

``compute_mu`` iterates the maximization operator

    U u(x) = max_a [ V(x) + sum_y u(y) q({y} | x, a) ]

from ``u_0 = 0``.  The iterates increase monotonically to the smallest
solution ``mu`` of ``mu >= V + Q_a mu`` for every action, which is also the
largest weighted occupation ``sum_n Q_phi^n V`` over stationary policies.
``compute_mu_ell`` does the same on the taboo kernel (mass into ``ell``
deleted) with ``V = 1``, giving the worst-case expected number of epochs
before hitting ``ell``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import FiniteMdp, ensure_valid

ROLES = ("V", "mu", "mu_ell")

DEFAULT_CAP = 1e12
DEFAULT_WINDOW = 50


@dataclass(frozen=True)
class WeightFunction:
    values: np.ndarray
    role: str = "V"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("weight must be a vector")
        if not np.all(np.isfinite(v)) or np.any(v < 1.0):
            raise ValueError("weight entries must be finite and >= 1")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def ones(cls, n, role="V"):
        return cls(np.ones(n), role)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class BoundReport:
    """Outcome of a weight computation.

    ``k_hat`` is ``(1 + tol) * sup weight / V``; for the hitting-time weight
    ``k_without_ell`` is the same supremum taken over states other than
    ``ell``.  ``trace`` holds the raw iterates ``u_0, u_1, ...`` (rows) when
    tracing was requested.
    """

    weight: WeightFunction | None
    k_hat: float
    iterations: int
    residual: float
    certified: bool
    tol: float
    V: WeightFunction
    message: str = ""
    ell: int | None = None
    k_without_ell: float | None = None
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_beta(self) -> float:
        """Smallest admissible discount factor ``(K - 1) / K``."""
        return (self.k_hat - 1.0) / self.k_hat


def v_norm(f, V) -> float:
    """``sup_x |f(x)| / V(x)``."""
    V = V.values if isinstance(V, WeightFunction) else np.asarray(V, dtype=float)
    return float(np.max(np.abs(np.asarray(f, dtype=float)) / V, initial=0.0))


def _as_weight(m, V):
    if V is None:
        return WeightFunction.ones(m.n_states)
    if not isinstance(V, WeightFunction):
        V = WeightFunction(V)
    if len(V) != m.n_states:
        raise ValueError("V has the wrong length")
    return V


def _iterate(m, data, V, tol, max_iter, cap, window, keep_trace, ell, violated):
    """Run ``u <- U u`` on the kernel ``data`` and polish the limit."""
    Vv = V.values
    row_cost = np.ascontiguousarray(Vv[m.state_of_row])
    data = np.ascontiguousarray(data)

    def U(u):
        return kernels.sweep(m.row_start, m.indptr, m.indices, data, row_cost, 1.0, u, True)[0]

    u = np.zeros(m.n_states)
    trace = [u] if keep_trace else None
    incs = []
    status, n, note = None, 0, "converged"
    while status is None:
        if n >= max_iter:
            status = f"{violated}: no convergence within {max_iter} iterations"
            break
        n += 1
        new = U(u)
        if keep_trace:
            trace.append(new)
        if not np.all(np.isfinite(new)) or np.max(new / Vv) > cap:
            status = f"{violated}: iterates exceed {cap:g} times V"
            u = new
            break
        inc = v_norm(new - u, Vv)
        incs.append(inc)
        u = new
        # increments are quantized in ulps of the iterate
        ulp = np.finfo(float).eps * np.max(new / Vv)
        if inc <= 16 * ulp:
            status = "converged"
        elif n >= 2:
            # running contraction estimate: worst of the last few ratios
            recent = incs[-6:]
            r = max(b / a for a, b in zip(recent[:-1], recent[1:]) if a > 0)
            if r < 1.0 and inc * r < tol * (1.0 - r):
                status = "converged"
            elif len(incs) > window and inc >= incs[-window - 1]:
                if inc <= 1e4 * ulp:
                    status = "converged"
                    note = "converged to floating-point resolution"
                else:
                    status = f"{violated}: increments stopped shrinking over {window} iterations"

    converged = status == "converged"
    trace_arr = np.array(trace) if keep_trace else None
    if not converged:
        return None, np.nan, n, np.inf, False, status, trace_arr, Vv

    if ell is not None:
        # extension to ell uses the converged off-ell values
        u = u.copy()
        u[ell] = U(u)[ell]
    # Scale by (1 + s): with fixed-point defect e (V-norm) the result is an
    # exact supersolution, mu >= V + Q_a mu for every action.
    e = v_norm(U(u) - u, Vv)
    s = (e + 8 * np.finfo(float).eps * np.max(u / Vv)) / (1.0 - e) if e < 0.5 else np.inf
    if not np.isfinite(s):
        return None, np.nan, n, e, False, f"{violated}: fixed-point defect too large", trace_arr, Vv
    mu = u * (1.0 + s)
    mu = np.maximum(mu, Vv)
    residual = v_norm(U(mu) - mu, Vv)
    return mu, residual, n, residual, True, note, trace_arr, Vv


def compute_mu(m: FiniteMdp, V=None, tol=1e-10, max_iter=100_000, *,
               cap=DEFAULT_CAP, window=DEFAULT_WINDOW, keep_trace=True) -> BoundReport:
    """Smallest ``mu >= V`` with ``mu(x) >= V(x) + sum_y mu(y) q({y}|x,a)``.

    Iteration stops once the V-norm increment ``d_n`` satisfies
    ``d_n * r / (1 - r) < tol`` with ``r`` the running increment ratio.
    Unbounded growth or stalled increments yield ``certified=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ensure_valid(m)
    V = _as_weight(m, V)
    mu, residual, n, _, ok, msg, trace, Vv = _iterate(
        m, m.data, V, tol, max_iter, cap, window, keep_trace, None,
        "Assumption T appears violated")
    if not ok:
        return BoundReport(None, np.inf, n, np.inf, False, tol, V, msg, trace=trace)
    k_hat = (1.0 + tol) * float(np.max(mu / Vv))
    return BoundReport(WeightFunction(mu, "mu"), k_hat, n, residual,
                       residual <= tol, tol, V, msg, trace=trace)


def compute_mu_ell(m: FiniteMdp, ell, tol=1e-10, max_iter=100_000, *,
                   cap=DEFAULT_CAP, window=DEFAULT_WINDOW, keep_trace=True) -> BoundReport:
    """Worst-case expected epochs before hitting ``ell``, extended to ``ell``.

    The iteration runs on the taboo kernel with unit weight; the value at
    ``ell`` is ``max_a [1 + sum_{y != ell} mu(y) q({y}|ell,a)]``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ensure_valid(m)
    ell = m.state_index(ell)
    V = WeightFunction.ones(m.n_states)
    mu, residual, n, _, ok, msg, trace, _ = _iterate(
        m, m.taboo_data(ell), V, tol, max_iter, cap, window, keep_trace, ell,
        "Assumption HT appears violated for this ell")
    if not ok:
        return BoundReport(None, np.inf, n, np.inf, False, tol, V, msg, ell=ell, trace=trace)
    k_hat = (1.0 + tol) * float(mu.max())
    off = np.delete(mu, ell)
    k_minus = (1.0 + tol) * float(off.max()) if off.size else 1.0
    return BoundReport(WeightFunction(mu, "mu_ell"), k_hat, n, residual,
                       residual <= tol, tol, V, msg, ell=ell, k_without_ell=k_minus,
                       trace=trace)


@dataclass(frozen=True)
class AssumptionCheck:
    holds: bool
    K: float
    bound: BoundReport
    message: str


def check_assumption_T(m: FiniteMdp, V=None, K=np.inf, tol=1e-10, **kw) -> AssumptionCheck:
    """Is ``sum_n Q_phi^n V <= K V`` for every stationary policy?"""
    if K < 1:
        raise ValueError("K must be >= 1")
    rep = compute_mu(m, V, tol, **kw)
    if not rep.certified:
        return AssumptionCheck(False, K, rep, rep.message)
    ok = rep.k_hat <= K
    msg = (f"holds: sup mu/V = {rep.k_hat:.12g} <= K = {K:.12g}" if ok else
           f"fails: sup mu/V = {rep.k_hat:.12g} > K = {K:.12g}")
    return AssumptionCheck(ok, K, rep, msg)


def check_assumption_HT(m: FiniteMdp, ell, K_ell=np.inf, tol=1e-10, **kw) -> AssumptionCheck:
    """Is the expected time to hit ``ell`` at most ``K_ell`` under every policy?"""
    if K_ell < 1:
        raise ValueError("K_ell must be >= 1")
    rep = compute_mu_ell(m, ell, tol, **kw)
    if not rep.certified:
        return AssumptionCheck(False, K_ell, rep, rep.message)
    ok = rep.k_hat <= K_ell
    msg = (f"holds: sup mu_ell = {rep.k_hat:.12g} <= K_ell = {K_ell:.12g}" if ok else
           f"fails: sup mu_ell = {rep.k_hat:.12g} > K_ell = {K_ell:.12g}")
    return AssumptionCheck(ok, K_ell, rep, msg)


@dataclass(frozen=True)
class ContractionReport:
    bound: float
    ratios: np.ndarray
    v_ratios: np.ndarray
    envelope: np.ndarray
    certified: bool
    envelope_ok: bool
    allowance: np.ndarray = field(default=None, repr=False)


ROUNDING_ULPS = 16


def contraction_diagnostics(trace, V, k_hat, weight=None, tol=1e-9) -> ContractionReport:
    """Per-step increment ratios of a fixed-point trace.

    ``ratios[n-1] = ||u_{n+1} - u_n|| / ||u_n - u_{n-1}||`` measured in the
    norm weighted by ``weight`` (default: the last iterate), which is the
    norm where ``U`` contracts with modulus ``(K - 1) / K``; ``certified``
    asks every ratio to stay below that modulus plus ``tol``.  ``v_ratios``
    are the same ratios in the plain V-norm (informational).
    ``envelope[n] = ||u_{n+1} - u_n||_V / K`` is checked against
    ``((K - 1) / K) ** n``.

    Stored iterates carry a few ulps of rounding each, so a computed ratio
    can exceed the exact one by ``allowance = 2 * 16 ulp / ||u_n - u_{n-1}||``;
    that allowance is added to the test.  Ratios whose allowance exceeds
    1e-3 carry no information and are reported as NaN.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.shape[0] < 3:
        raise ValueError("need at least 3 iterates")
    Vv = V.values if isinstance(V, WeightFunction) else np.asarray(V, dtype=float)
    if weight is None:
        w = np.maximum(trace[-1], Vv)
    else:
        w = weight.values if isinstance(weight, WeightFunction) else np.asarray(weight, float)
    rho = (k_hat - 1.0) / k_hat
    diffs = np.abs(np.diff(trace, axis=0))
    d_w = np.max(diffs / w, axis=1)
    d_v = np.max(diffs / Vv, axis=1)
    ulp = np.finfo(float).eps * np.max(np.abs(trace) / w, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        allowance = 2 * ROUNDING_ULPS * ulp[1:-1] / d_w[:-1]
        usable = allowance < 1e-3
        ratios = np.where(usable, d_w[1:] / d_w[:-1], np.nan)
        v_ratios = np.where(d_v[:-1] > 0, d_v[1:] / d_v[:-1], np.nan)
    envelope = d_v / k_hat
    steps = np.arange(envelope.shape[0])
    env_ok = bool(np.all(envelope <= rho ** steps * (1 + 1e-12) + tol))
    ok = bool(np.all(ratios[usable] <= rho + tol + allowance[usable]))
    return ContractionReport(rho, ratios, v_ratios, envelope, ok and env_ok, env_ok,
                             np.where(usable, allowance, np.nan))
