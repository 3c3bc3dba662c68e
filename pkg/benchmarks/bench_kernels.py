#!/usr/bin/env python3
"""Compare the jit-compiled kernels against the interpreted numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeat 5]
The same comparison is what CCG_BACKEND=numpy switches at import time.
"""

import argparse
import time

import numpy as np

import ccg._kernels as kernels
from ccg.congestion import FractionalCost
from ccg.equilibrium import ZddExactLmo, fw_equilibrium
from ccg.network import FamilySpec, Network
from ccg.zdd import build_family, count_by_length


def rate_network():
    cols = 13
    top = [i + 1 for i in range(cols)]
    bot = [i + 14 for i in range(cols)]
    edges = set()
    for j in range(cols):
        edges.add((top[j], bot[j]))
    for j in range(cols - 1):
        edges.add((top[j], top[j + 1]))
        edges.add((bot[j], bot[j + 1]))
        edges.add((top[j], bot[j + 1]))
    edges.add((2, 14))
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in edges))
    rng = np.random.default_rng(42)
    d = 0.2 + 0.8 * rng.random(len(edges))
    return Network(node_count=26, edges=edges, d=d / d.max())


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    net = rate_network()
    z = build_family(net, FamilySpec.st_paths(1, 26))
    model = FractionalCost(d=net.d, c_scale=5.0)
    theta = np.ones(net.n)

    # warm the jit cache before timing
    fw_equilibrium(model, theta, 10, ZddExactLmo(z))

    a = np.ascontiguousarray(model.load_slope(theta))
    b = np.ascontiguousarray(model.intercept(theta))
    y0 = np.zeros(net.n)
    y0[0] = 1.0
    rng = np.random.default_rng(0)
    w = rng.normal(size=net.n)
    uniforms = rng.random((2000, z.depth_cap))
    table = count_by_length(z).log_table
    targets = np.full(2000, 8, dtype=np.int64)
    indptr, adj_node, adj_edge = net.csr()

    cases = {
        "zdd_min_cost_dp": (
            lambda impl: impl(z.label, z.lo, z.hi, w, z.root),
        ),
        "zdd_sample_by_length (m=2000)": (
            lambda impl: impl(z.label, z.lo, z.hi, table, z.root, targets, uniforms, z.n),
        ),
        "fw_affine_zdd (T=1000)": (
            lambda impl: impl(z.label, z.lo, z.hi, z.root, a, b, y0, 1000),
        ),
        "fw_affine_dijkstra (T=1000)": (
            lambda impl: impl(indptr, adj_node, adj_edge, net.node_count + 1, 1, 26, a, b, y0, 1000),
        ),
    }

    name_map = {
        "zdd_min_cost_dp": "zdd_min_cost_dp",
        "zdd_sample_by_length (m=2000)": "zdd_sample_by_length",
        "fw_affine_zdd (T=1000)": "fw_affine_zdd",
        "fw_affine_dijkstra (T=1000)": "fw_affine_dijkstra",
    }

    print(f"active backend: {kernels.ACTIVE_BACKEND}   (repeat={args.repeat}, best-of)")
    print(f"{'kernel':<34} {'jit/active':>12} {'numpy':>12} {'speedup':>9}")
    for label, (call,) in cases.items():
        fast_fn = getattr(kernels, name_map[label])
        slow_fn = kernels.PY_IMPL[name_map[label]]
        call(fast_fn)   # ensure compiled
        t_fast = timed(lambda: call(fast_fn), args.repeat)
        t_slow = timed(lambda: call(slow_fn), args.repeat)
        print(f"{label:<34} {t_fast * 1e3:>10.2f}ms {t_slow * 1e3:>10.2f}ms {t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
