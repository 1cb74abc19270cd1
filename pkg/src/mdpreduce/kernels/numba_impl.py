"""Numba-compiled kernels; same contracts as :mod:`.numpy_impl`."""
import numpy as np
from numba import njit


@njit(cache=True)
def row_dot(indptr, indices, data, u):
    n_rows = indptr.shape[0] - 1
    out = np.zeros(n_rows)
    for r in range(n_rows):
        acc = 0.0
        for k in range(indptr[r], indptr[r + 1]):
            acc += data[k] * u[indices[k]]
        out[r] = acc
    return out


@njit(cache=True)
def sweep(row_start, indptr, indices, data, cost, scale, u, maximize):
    n_states = row_start.shape[0] - 1
    best = np.empty(n_states)
    arg = np.empty(n_states, dtype=np.int64)
    # per-row sums are formed exactly as in row_dot so both backends agree
    vals = row_dot(indptr, indices, data, u)
    for x in range(n_states):
        lo = row_start[x]
        b = cost[lo] + scale * vals[lo]
        j = 0
        for r in range(lo + 1, row_start[x + 1]):
            v = cost[r] + scale * vals[r]
            if (maximize and v > b) or (not maximize and v < b):
                b = v
                j = r - lo
        best[x] = b
        arg[x] = j
    return best, arg


@njit(cache=True)
def simulate(row_start, indptr, indices, data, cost, policy, start, uniforms):
    reps, horizon = uniforms.shape
    out = np.empty(reps)
    for i in range(reps):
        x = start
        total = 0.0
        for t in range(horizon):
            r = row_start[x] + policy[x]
            total += cost[r]
            u = uniforms[i, t]
            acc = 0.0
            nxt = -1
            fallback = x
            for k in range(indptr[r], indptr[r + 1]):
                if data[k] > 0.0:
                    fallback = indices[k]
                acc += data[k]
                if u < acc:
                    nxt = indices[k]
                    break
            x = nxt if nxt >= 0 else fallback
        out[i] = total / horizon
    return out
