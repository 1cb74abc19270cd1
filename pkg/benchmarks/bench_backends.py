"""Compare the numba and numpy kernels on a large inventory model.

    python benchmarks/bench_backends.py [--capacity 300] [--repeat 5]

Both backends are imported directly (the MDPREDUCE_BACKEND flag only
chooses the default), fed identical arrays, and checked for bitwise
agreement before timing.  Numba compilation happens in a warm-up call
and is reported separately.
"""
import argparse
import time

import numpy as np

from mdpreduce.kernels import get_backend
from mdpreduce.models import InventorySpec, build_inventory_mdp


def big_inventory(capacity, max_order, max_demand):
    d = np.arange(max_demand + 1)
    g = np.exp(-0.5 * ((d - max_demand / 2) / (max_demand / 5)) ** 2)
    g /= g.sum()
    spec = InventorySpec(capacity=capacity, max_order=max_order,
                         demand_pmf=dict(zip(d.tolist(), g.tolist())),
                         fixed_cost=50.0, unit_cost=1.0, holding=0.1)
    return build_inventory_mdp(spec)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--capacity", type=int, default=300)
    ap.add_argument("--max-order", type=int, default=80)
    ap.add_argument("--max-demand", type=int, default=100)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    m = big_inventory(args.capacity, args.max_order, args.max_demand)
    print(f"model: {m.n_states} states, {m.n_rows} rows, {m.indices.size} kernel entries")
    rng = np.random.default_rng(0)
    v = rng.random(m.n_states)
    phi = rng.integers(0, m.n_actions)
    uniforms = rng.random((args.replications, args.horizon))

    results = {}
    for name in ("numba", "numpy"):
        k = get_backend(name)

        def sweeps():
            u = v
            for _ in range(args.sweeps):
                u = k.sweep(m.row_start, m.indptr, m.indices, m.data, m.cost, 0.99, u, False)[0]
            return u

        def sim():
            return k.simulate(m.row_start, m.indptr, m.indices, m.data, m.cost,
                              phi, 0, uniforms)

        t0 = time.perf_counter()
        out = (sweeps(), sim())
        warm = time.perf_counter() - t0
        results[name] = (out, warm, best_of(sweeps, args.repeat), best_of(sim, args.repeat))

    (a_sw, a_sim), (b_sw, b_sim) = results["numba"][0], results["numpy"][0]
    print(f"agreement: sweep max |diff| = {np.max(np.abs(a_sw - b_sw)):.3g}, "
          f"simulate max |diff| = {np.max(np.abs(np.asarray(a_sim) - b_sim)):.3g}")
    print(f"{'backend':8s} {'first call':>11s} {'sweeps':>10s} {'simulate':>10s}")
    for name, (_, warm, t_sw, t_sim) in results.items():
        print(f"{name:8s} {warm:10.3f}s {t_sw:9.4f}s {t_sim:9.4f}s")
    nb, np_ = results["numba"], results["numpy"]
    print(f"speedup (numpy / numba): sweeps x{np_[2] / nb[2]:.1f}, "
          f"simulate x{np_[3] / nb[3]:.1f}")


if __name__ == "__main__":
    main()
