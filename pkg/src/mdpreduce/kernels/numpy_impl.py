"""Pure-numpy kernels."""
import numpy as np


def row_dot(indptr, indices, data, u):
    """Per-row integral ``sum_k data[k] * u[indices[k]]``."""
    n_rows = indptr.shape[0] - 1
    entry_row = np.repeat(np.arange(n_rows), np.diff(indptr))
    return np.bincount(entry_row, weights=data * u[indices], minlength=n_rows)


def sweep(row_start, indptr, indices, data, cost, scale, u, maximize):
    """One Bellman sweep ``opt_a [cost + scale * (q u)]`` per state.

    Returns the optimal values and the local (per-state) action index of the
    first optimizer, so ties go to the lowest action index.
    """
    vals = cost + scale * row_dot(indptr, indices, data, u)
    starts = row_start[:-1]
    reduce = np.maximum if maximize else np.minimum
    best = reduce.reduceat(vals, starts)
    state_of_row = np.repeat(np.arange(starts.shape[0]), np.diff(row_start))
    hit = np.flatnonzero(vals == best[state_of_row])
    _, first = np.unique(state_of_row[hit], return_index=True)
    arg = hit[first] - starts
    return best, arg.astype(np.int64)


def simulate(row_start, indptr, indices, data, cost, policy, start, uniforms):
    """Average one-step cost along sampled paths, one path per uniform row.

    ``uniforms`` has shape ``(replications, horizon)``; replications advance
    in lockstep.
    """
    n_states = row_start.shape[0] - 1
    rows = row_start[:-1] + policy
    dense = np.zeros((n_states, n_states))
    last = np.zeros(n_states, dtype=np.int64)
    for x in range(n_states):
        lo, hi = indptr[rows[x]], indptr[rows[x] + 1]
        dense[x, indices[lo:hi]] = data[lo:hi]
        pos = np.flatnonzero(data[lo:hi] > 0)
        last[x] = indices[lo + pos[-1]] if pos.size else x
    cum = np.cumsum(dense, axis=1)
    cost_pol = cost[rows]

    reps, horizon = uniforms.shape
    x = np.full(reps, start, dtype=np.int64)
    total = np.zeros(reps)
    for t in range(horizon):
        total += cost_pol[x]
        above = cum[x] > uniforms[:, t, None]
        nxt = above.argmax(axis=1)
        miss = ~above[np.arange(reps), nxt]
        x = np.where(miss, last[x], nxt)
    return total / horizon
