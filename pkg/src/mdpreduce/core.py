"""Finite MDP data model and exact kernel primitives.

A model is stored row-wise: every feasible state-action pair ``(x, a)`` is
one *row*, rows of state ``x`` occupy ``row_start[x]:row_start[x + 1]``,
and the transition kernel is a CSR matrix over rows (targets sorted, no
duplicates, no explicit zeros).  Row masses are arbitrary nonnegative
numbers; a row may be empty, which reads as certain termination.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

#: above this many states policy systems are solved by Neumann iteration
DIRECT_SOLVE_LIMIT = 2000


class ModelError(ValueError):
    """Structurally malformed or invalid model."""


class UnknownStateError(ModelError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class NotTransientError(ArithmeticError):
    """Raised when ``(I - Q_phi) v = rhs`` has no finite nonnegative solution."""


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.flags.writeable = False
    return a


def canonical_csr(entry_row, indices, data, n_rows, n_cols):
    """Sort targets within rows, merge duplicates and drop zero masses."""
    entry_row = np.asarray(entry_row, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    data = np.asarray(data, dtype=float)
    if indices.size:
        key = entry_row * n_cols + indices
        order = np.argsort(key, kind="stable")
        key, data = key[order], data[order]
        uniq, first = np.unique(key, return_index=True)
        data = np.add.reduceat(data, first)
        keep = data != 0.0
        uniq, data = uniq[keep], data[keep]
        entry_row, indices = uniq // n_cols, uniq % n_cols
    counts = np.bincount(entry_row, minlength=n_rows)
    indptr = np.concatenate(([0], np.cumsum(counts)))
    return indptr, indices, data


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """Finite MDP with a nonnegative finite-measure kernel.

    Construct through :meth:`from_rows` or :meth:`from_dense`; the raw
    constructor expects canonical CSR arrays.  Value invariants (signs,
    finiteness, nonempty action sets) are *not* enforced here; use
    :func:`validate_model`.
    """

    states: tuple
    actions: tuple
    row_start: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    cost: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        if len(set(states)) != len(states):
            raise ModelError("state labels must be unique")
        if len(actions) != len(states):
            raise ModelError("need one action list per state")
        for s, acts in zip(states, actions):
            if len(set(acts)) != len(acts):
                raise ModelError(f"duplicate action label at state {s!r}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(states)})
        counts = [len(a) for a in actions]
        object.__setattr__(self, "row_start",
                           _frozen(np.concatenate(([0], np.cumsum(counts))), np.int64))
        for name, dtype in (("indptr", np.int64), ("indices", np.int64),
                            ("data", float), ("cost", float)):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        n_rows = int(self.row_start[-1])
        if self.indptr.shape != (n_rows + 1,) or self.cost.shape != (n_rows,):
            raise ModelError("kernel/cost arrays do not match the action sets")
        if self.indices.shape != self.data.shape or self.indptr[-1] != self.indices.size:
            raise ModelError("inconsistent CSR arrays")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= len(states)):
            raise ModelError("kernel target out of range")

    # -- construction -----------------------------------------------------
    @classmethod
    def from_rows(cls, states: Sequence, actions: Sequence[Sequence],
                  kernel: Sequence[Sequence], cost: Sequence[Sequence[float]]):
        """Build from nested per-state, per-action rows.

        ``kernel[x][a]`` is a mapping ``target -> mass`` or an iterable of
        ``(target, mass)`` pairs; targets are state indices or labels.
        """
        index = {str(s): i for i, s in enumerate(states)}
        rows, targets, masses, costs = [], [], [], []
        r = 0
        for x, acts in enumerate(actions):
            for a in range(len(acts)):
                row = kernel[x][a]
                items = row.items() if isinstance(row, Mapping) else row
                for y, mass in items:
                    rows.append(r)
                    targets.append(_resolve(index, y, len(states)))
                    masses.append(mass)
                costs.append(cost[x][a])
                r += 1
        indptr, indices, data = canonical_csr(rows, targets, masses, r, len(states))
        return cls(tuple(states), tuple(tuple(a) for a in actions),
                   None, indptr, indices, data, np.asarray(costs, dtype=float))

    @classmethod
    def from_dense(cls, q, c, states=None, actions=None):
        """Build from ``q[x, a, y]`` and ``c[x, a]`` (same action count everywhere)."""
        q = np.asarray(q, dtype=float)
        c = np.asarray(c, dtype=float)
        n, k, _ = q.shape
        states = tuple(states) if states is not None else tuple(f"s{i}" for i in range(n))
        if actions is None:
            actions = tuple(tuple(f"a{j}" for j in range(k)) for _ in range(n))
        flat = q.reshape(n * k, n)
        rr, yy = np.nonzero(flat)
        indptr, indices, data = canonical_csr(rr, yy, flat[rr, yy], n * k, n)
        return cls(states, actions, None, indptr, indices, data, c.reshape(-1))

    def with_kernel(self, indptr, indices, data, cost=None):
        """Same states/actions, new kernel (and optionally new costs)."""
        return FiniteMdp(self.states, self.actions, None, indptr, indices, data,
                         self.cost if cost is None else cost)

    # -- queries ----------------------------------------------------------
    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_rows(self) -> int:
        return int(self.row_start[-1])

    @property
    def n_actions(self) -> np.ndarray:
        return np.diff(self.row_start)

    @property
    def state_of_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states), self.n_actions)

    @property
    def entry_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.indptr))

    def state_index(self, state) -> int:
        return _resolve(self._index, state, self.n_states)

    def row_index(self, x, a) -> int:
        x = self.state_index(x)
        if isinstance(a, (str, np.str_)):
            try:
                a = self.actions[x].index(a)
            except ValueError:
                raise ModelError(f"no action {a!r} at state {self.states[x]!r}") from None
        if not 0 <= a < len(self.actions[x]):
            raise ModelError(f"action index {a} out of range at state {self.states[x]!r}")
        return int(self.row_start[x] + a)

    def row(self, x, a):
        """``(targets, masses)`` of the row ``(x, a)``."""
        r = self.row_index(x, a)
        lo, hi = self.indptr[r], self.indptr[r + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def row_mass(self) -> np.ndarray:
        """Total mass ``q(X | x, a)`` of every row."""
        return np.bincount(self.entry_row, weights=self.data, minlength=self.n_rows)

    def is_stochastic(self, tol=1e-10) -> bool:
        return bool(np.all(np.abs(self.row_mass() - 1.0) <= tol))

    def dense_kernel(self) -> np.ndarray:
        """Kernel as a dense ``(n_rows, n_states)`` array."""
        out = np.zeros((self.n_rows, self.n_states))
        out[self.entry_row, self.indices] = self.data
        return out

    def policy_rows(self, policy) -> np.ndarray:
        return self.row_start[:-1] + check_policy(self, policy)

    def policy_matrix(self, policy) -> np.ndarray:
        """Dense ``Q_phi`` of a stationary policy."""
        rows = self.policy_rows(policy)
        out = np.zeros((self.n_states, self.n_states))
        for x, r in enumerate(rows):
            lo, hi = self.indptr[r], self.indptr[r + 1]
            out[x, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def policy_cost(self, policy) -> np.ndarray:
        return self.cost[self.policy_rows(policy)]

    def taboo_data(self, ell) -> np.ndarray:
        """Kernel masses with every transition into ``ell`` removed."""
        ell = self.state_index(ell)
        return np.where(self.indices == ell, 0.0, self.data)


def _resolve(index, state, n):
    if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
        if 0 <= state < n:
            return int(state)
        raise UnknownStateError(f"no such state: index {state}")
    try:
        return index[str(state)]
    except KeyError:
        raise UnknownStateError(f"no such state: {state!r}") from None


def check_policy(m: FiniteMdp, policy) -> np.ndarray:
    """Validate a stationary policy (one action index per state)."""
    phi = np.asarray(policy, dtype=np.int64)
    if phi.shape != (m.n_states,):
        raise ModelError(f"policy must assign one action to each of {m.n_states} states")
    if np.any(phi < 0) or np.any(phi >= m.n_actions):
        bad = int(np.flatnonzero((phi < 0) | (phi >= m.n_actions))[0])
        raise ModelError(f"policy action {phi[bad]} invalid at state {m.states[bad]!r}")
    return phi


def policy_from_labels(m: FiniteMdp, choice: Mapping) -> np.ndarray:
    """Stationary policy from ``{state label: action label}``."""
    phi = np.zeros(m.n_states, dtype=np.int64)
    for s, a in choice.items():
        x = m.state_index(s)
        phi[x] = m.row_index(x, a) - m.row_start[x]
    return phi


# -- validation ----------------------------------------------------------
@dataclass(frozen=True)
class ModelDiagnostics:
    violations: tuple
    sup_row_mass: float

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_model(m: FiniteMdp) -> ModelDiagnostics:
    """List invariant violations; never raises."""
    problems = []
    for x in np.flatnonzero(m.n_actions == 0):
        problems.append(f"empty action set at state {m.states[x]!r}")
    sr = m.state_of_row
    labels = [(m.states[x], m.actions[x][r - m.row_start[x]]) for r, x in enumerate(sr)]
    for r in np.flatnonzero(~np.isfinite(m.cost)):
        problems.append("non-finite cost at (%r, %r)" % labels[r])
    for r in np.flatnonzero(m.cost < 0):
        problems.append("negative cost at (%r, %r)" % labels[r])
    rows = m.entry_row
    for k in np.flatnonzero(~np.isfinite(m.data)):
        problems.append("non-finite mass at (%r, %r)" % labels[rows[k]])
    for k in np.flatnonzero(m.data < 0):
        problems.append("negative mass at (%r, %r) -> %r"
                        % (*labels[rows[k]], m.states[m.indices[k]]))
    mass = m.row_mass()
    sup = float(mass.max()) if mass.size else 0.0
    return ModelDiagnostics(tuple(problems), sup)


def ensure_valid(m: FiniteMdp) -> FiniteMdp:
    diag = validate_model(m)
    if not diag.valid:
        raise ModelError("; ".join(diag.violations))
    return m


# -- kernel split --------------------------------------------------------
@dataclass(frozen=True)
class KernelSplit:
    """``q = alpha * p`` row by row; ``p`` rows exist only where ``alpha > 0``."""

    alpha: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    p_data: np.ndarray
    defined: np.ndarray

    def p_row(self, r):
        if not self.defined[r]:
            raise ValueError(f"p undefined on row {r} (zero total mass)")
        lo, hi = self.indptr[r], self.indptr[r + 1]
        return self.indices[lo:hi], self.p_data[lo:hi]


def split_kernel(m: FiniteMdp) -> KernelSplit:
    alpha = m.row_mass()
    rows = m.entry_row
    p_data = m.data / alpha[rows] if m.data.size else m.data.copy()
    return KernelSplit(_frozen(alpha, float), m.indptr, m.indices,
                       _frozen(p_data, float), _frozen(alpha > 0, bool))


# -- kernel application --------------------------------------------------
def _policy_apply(m, policy, u, data):
    rows = m.policy_rows(policy)
    u = np.asarray(u, dtype=float)
    if u.shape != (m.n_states,):
        raise ValueError("u has the wrong length")
    return kernels.row_dot(m.indptr, m.indices, np.ascontiguousarray(data), u)[rows]


def apply_kernel(m: FiniteMdp, policy, u) -> np.ndarray:
    """``Q_phi u(x) = sum_y u(y) q({y} | x, phi(x))``."""
    return _policy_apply(m, policy, u, m.data)


def taboo_apply(m: FiniteMdp, policy, ell, u) -> np.ndarray:
    """Like :func:`apply_kernel` but mass entering ``ell`` is dropped."""
    return _policy_apply(m, policy, u, m.taboo_data(ell))


# -- exact policy evaluation ---------------------------------------------
def solve_policy_system(m: FiniteMdp, policy, rhs, *, scale=1.0, taboo=None,
                        neumann_tol=1e-14, max_iter=1_000_000, direct_limit=None):
    """Solve ``v = rhs + scale * Q_phi v`` (optionally with a taboo kernel).

    Direct elimination up to :data:`DIRECT_SOLVE_LIMIT` states, Neumann
    iteration above.  Raises :class:`NotTransientError` if the system is
    singular or the solution is not finite and nonnegative for a
    nonnegative right-hand side.
    """
    rhs = np.asarray(rhs, dtype=float)
    data = m.data if taboo is None else m.taboo_data(taboo)
    rows = m.policy_rows(policy)
    n = m.n_states
    if n <= (DIRECT_SOLVE_LIMIT if direct_limit is None else direct_limit):
        Q = np.zeros((n, n))
        for x, r in enumerate(rows):
            lo, hi = m.indptr[r], m.indptr[r + 1]
            Q[x, m.indices[lo:hi]] = data[lo:hi]
        try:
            v = np.linalg.solve(np.eye(n) - scale * Q, rhs)
        except np.linalg.LinAlgError:
            raise NotTransientError("policy not transient (singular system)") from None
    else:
        from scipy import sparse

        sub_ptr = np.concatenate(([0], np.cumsum(m.indptr[rows + 1] - m.indptr[rows])))
        take = np.concatenate([np.arange(m.indptr[r], m.indptr[r + 1]) for r in rows])
        Q = sparse.csr_matrix((scale * data[take], m.indices[take], sub_ptr), shape=(n, n))
        v = rhs.copy()
        term = rhs.copy()
        for _ in range(max_iter):
            term = Q @ term
            v += term
            size = np.abs(term).max(initial=0.0)
            if size <= neumann_tol * max(1.0, np.abs(v).max()):
                break
            if not np.isfinite(size) or size > 1e300:
                raise NotTransientError("policy not transient (Neumann series diverges)")
        else:
            raise NotTransientError("policy not transient (Neumann series did not converge)")
    scale_ref = max(1.0, float(np.abs(v).max(initial=0.0))) if np.all(np.isfinite(v)) else 1.0
    if not np.all(np.isfinite(v)):
        raise NotTransientError("policy not transient (non-finite solution)")
    if np.all(rhs >= 0) and v.min(initial=0.0) < -1e-9 * scale_ref:
        raise NotTransientError("policy not transient (negative solution)")
    return v


def policy_total_cost(m: FiniteMdp, policy) -> np.ndarray:
    """Total cost ``v_phi = sum_n Q_phi^n c_phi`` of a stationary policy."""
    return solve_policy_system(m, policy, m.policy_cost(policy))


def sup_norm(f) -> float:
    return float(np.abs(np.asarray(f, dtype=float)).max(initial=0.0))


def labelled(m: FiniteMdp, values: Iterable) -> dict:
    return dict(zip(m.states, (float(v) for v in values)))
