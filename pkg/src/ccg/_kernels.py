"""Hot numeric kernels: Dijkstra, decision-diagram DPs, samplers, fused FW loops.

Every kernel is written once as a plain Python function over numpy arrays and
then, depending on the ``CCG_BACKEND`` environment variable, compiled with
numba (``CCG_BACKEND=numba``, the default) or left as the interpreted numpy
fallback (``CCG_BACKEND=numpy``).  Both paths execute the identical statements
in the identical order, so results are bit-for-bit equal across backends.

The uncompiled originals stay importable as ``PY_IMPL[name]`` for the
fallback-vs-jit benchmark and the backend-equivalence tests.

Decision-diagram node convention (shared with :mod:`ccg.zdd`): node ids are
array indices, id 0 is the reject terminal, id 1 is the accept terminal,
internal nodes start at id 2 and are topologically ordered so that both
children of node ``v`` have ids ``< v``.  ``label[v]`` is the resource index
decided at ``v``.
"""

import math
import os
import warnings

import numpy as np

_NEG_INF = -math.inf


def dijkstra_sssp(indptr, adj_node, adj_edge, weights, src, n_slots):
    """Single-source shortest paths over a CSR adjacency.

    Ties are deterministic: frontier entries with equal distance pop in
    increasing node-id order, and among equal-distance predecessor edges the
    smallest edge index is kept (refined only while the node is unsettled).

    Returns (dist, pred_edge, pred_node); unreachable slots keep dist=inf and
    pred -1.
    """
    dist = np.full(n_slots, math.inf)
    pred_edge = np.full(n_slots, -1, dtype=np.int64)
    pred_node = np.full(n_slots, -1, dtype=np.int64)
    settled = np.zeros(n_slots, dtype=np.uint8)

    cap = adj_node.shape[0] + 1
    heap_d = np.empty(cap)
    heap_n = np.empty(cap, dtype=np.int64)
    size = 0

    dist[src] = 0.0
    heap_d[0] = 0.0
    heap_n[0] = src
    size = 1

    while size > 0:
        d0 = heap_d[0]
        u = heap_n[0]
        size -= 1
        heap_d[0] = heap_d[size]
        heap_n[0] = heap_n[size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < size and (heap_d[l] < heap_d[m] or (heap_d[l] == heap_d[m] and heap_n[l] < heap_n[m])):
                m = l
            if r < size and (heap_d[r] < heap_d[m] or (heap_d[r] == heap_d[m] and heap_n[r] < heap_n[m])):
                m = r
            if m == i:
                break
            td = heap_d[i]
            tn = heap_n[i]
            heap_d[i] = heap_d[m]
            heap_n[i] = heap_n[m]
            heap_d[m] = td
            heap_n[m] = tn
            i = m

        if settled[u] == 1:
            continue
        settled[u] = 1
        for k in range(indptr[u], indptr[u + 1]):
            v = adj_node[k]
            e = adj_edge[k]
            nd = d0 + weights[e]
            if settled[v] == 1:
                continue
            if nd < dist[v]:
                dist[v] = nd
                pred_edge[v] = e
                pred_node[v] = u
                j = size
                heap_d[j] = nd
                heap_n[j] = v
                size += 1
                while j > 0:
                    p = (j - 1) // 2
                    if heap_d[j] < heap_d[p] or (heap_d[j] == heap_d[p] and heap_n[j] < heap_n[p]):
                        td = heap_d[j]
                        tn = heap_n[j]
                        heap_d[j] = heap_d[p]
                        heap_n[j] = heap_n[p]
                        heap_d[p] = td
                        heap_n[p] = tn
                        j = p
                    else:
                        break
            elif nd == dist[v] and e < pred_edge[v]:
                pred_edge[v] = e
                pred_node[v] = u
    return dist, pred_edge, pred_node


def zdd_min_cost_dp(label, lo, hi, weights, root):
    """Min additive cost over the encoded family plus the argmin incidence row.

    cost(reject)=inf, cost(accept)=0, cost(v)=min(cost(lo), w[label]+cost(hi));
    traceback prefers the lo child on exact ties.
    """
    num = label.shape[0]
    n = weights.shape[0]
    cost = np.empty(num)
    cost[0] = math.inf
    cost[1] = 0.0
    for v in range(2, num):
        cl = cost[lo[v]]
        ch = weights[label[v]] + cost[hi[v]]
        cost[v] = cl if cl <= ch else ch
    inc = np.zeros(n, dtype=np.uint8)
    v = root
    while v >= 2:
        cl = cost[lo[v]]
        ch = weights[label[v]] + cost[hi[v]]
        if cl <= ch:
            v = lo[v]
        else:
            inc[label[v]] = 1
            v = hi[v]
    return cost[root], inc


def zdd_log_count_dp(lo, hi):
    """log of the number of accept-completions below every node."""
    num = lo.shape[0]
    logn = np.empty(num)
    logn[0] = _NEG_INF
    logn[1] = 0.0
    for v in range(2, num):
        a = logn[lo[v]]
        b = logn[hi[v]]
        if a == _NEG_INF:
            logn[v] = b
        elif b == _NEG_INF:
            logn[v] = a
        elif a >= b:
            logn[v] = a + math.log1p(math.exp(b - a))
        else:
            logn[v] = b + math.log1p(math.exp(a - b))
    return logn


def zdd_log_length_dp(lo, hi, lmax):
    """Table of log counts split by remaining strategy length.

    Row v, column r holds log of the number of completions below v that pick
    exactly r further resources: N_r(v) = N_r(lo) + N_{r-1}(hi).
    """
    num = lo.shape[0]
    table = np.full((num, lmax + 1), _NEG_INF)
    table[1, 0] = 0.0
    for v in range(2, num):
        for r in range(lmax + 1):
            a = table[lo[v], r]
            b = table[hi[v], r - 1] if r > 0 else _NEG_INF
            if a == _NEG_INF:
                table[v, r] = b
            elif b == _NEG_INF:
                table[v, r] = a
            elif a >= b:
                table[v, r] = a + math.log1p(math.exp(b - a))
            else:
                table[v, r] = b + math.log1p(math.exp(a - b))
    return table


def zdd_sample_scalar(label, lo, hi, logn, root, uniforms, n):
    """m uniform draws from the family via scalar-count branching.

    At node v the lo child is taken with probability N(lo)/N(v); one uniform
    from the pre-drawn row is consumed per visited node.
    """
    m = uniforms.shape[0]
    inc = np.zeros((m, n), dtype=np.uint8)
    for s in range(m):
        v = root
        j = 0
        while v >= 2:
            ll = logn[lo[v]]
            if ll == _NEG_INF:
                plo = 0.0
            else:
                plo = math.exp(ll - logn[v])
            if uniforms[s, j] < plo:
                v = lo[v]
            else:
                inc[s, label[v]] = 1
                v = hi[v]
            j += 1
    return inc


def zdd_sample_by_length(label, lo, hi, table, root, targets, uniforms, n):
    """m draws uniform within a per-sample target length stratum.

    Branching uses the length-refined counts: lo keeps the remaining length r,
    hi consumes one unit: P(lo) = N_r(lo)/N_r(v).
    """
    m = uniforms.shape[0]
    inc = np.zeros((m, n), dtype=np.uint8)
    for s in range(m):
        v = root
        r = targets[s]
        j = 0
        while v >= 2:
            ll = table[lo[v], r]
            if ll == _NEG_INF or r < 0:
                plo = 0.0
            else:
                plo = math.exp(ll - table[v, r])
            if uniforms[s, j] < plo and r >= 0:
                v = lo[v]
            elif r > 0:
                inc[s, label[v]] = 1
                r -= 1
                v = hi[v]
            else:
                v = lo[v]
            j += 1
    return inc


def fw_affine_zdd(label, lo, hi, root, slope, intercept, y0, T):
    """Frank-Wolfe with exact diagram LMO, fused for affine-in-load costs.

    Gradient g = intercept + slope*y; each iteration runs the min-cost DP,
    takes the exact line-search step on the quadratic segment restriction, and
    records potential, step size, duality gap and the chosen vertex.
    """
    n = slope.shape[0]
    num = label.shape[0]
    y = y0.copy()
    pot = np.empty(T + 1)
    gamma = np.empty(T)
    gap = np.empty(T + 1)
    chosen = np.zeros((T, n), dtype=np.uint8)
    g = np.empty(n)
    cost = np.empty(num)

    p = 0.0
    for i in range(n):
        p += intercept[i] * y[i] + 0.5 * slope[i] * y[i] * y[i]
    pot[0] = p

    for t in range(T + 1):
        gy = 0.0
        for i in range(n):
            g[i] = intercept[i] + slope[i] * y[i]
            gy += g[i] * y[i]

        cost[0] = math.inf
        cost[1] = 0.0
        for v in range(2, num):
            cl = cost[lo[v]]
            ch = g[label[v]] + cost[hi[v]]
            cost[v] = cl if cl <= ch else ch
        best = cost[root]
        gap[t] = gy - best
        if t == T:
            break

        v = root
        while v >= 2:
            cl = cost[lo[v]]
            ch = g[label[v]] + cost[hi[v]]
            if cl <= ch:
                v = lo[v]
            else:
                chosen[t, label[v]] = 1
                v = hi[v]

        qa = 0.0
        qb = 0.0
        for i in range(n):
            z = chosen[t, i] - y[i]
            qa += 0.5 * slope[i] * z * z
            qb += g[i] * z
        if qa <= 1e-15:
            gam = 1.0 if qb < 0.0 else 0.0
        else:
            gam = -qb / (2.0 * qa)
            if gam < 0.0:
                gam = 0.0
            elif gam > 1.0:
                gam = 1.0
        gamma[t] = gam

        p = 0.0
        for i in range(n):
            y[i] = y[i] + gam * (chosen[t, i] - y[i])
            p += intercept[i] * y[i] + 0.5 * slope[i] * y[i] * y[i]
        pot[t + 1] = p
    return y, pot, gamma, gap, chosen


def fw_affine_dijkstra(indptr, adj_node, adj_edge, n_slots, src, dst,
                       slope, intercept, y0, T):
    """Frank-Wolfe with the shortest-path LMO fused in (affine-in-load costs).

    Returns a status flag first: 0 ok, 1 negative edge weight encountered,
    2 destination unreachable.
    """
    n = slope.shape[0]
    y = y0.copy()
    pot = np.empty(T + 1)
    gamma = np.empty(T)
    gap = np.empty(T + 1)
    chosen = np.zeros((T, n), dtype=np.uint8)
    g = np.empty(n)

    dist = np.empty(n_slots)
    pred_edge = np.empty(n_slots, dtype=np.int64)
    pred_node = np.empty(n_slots, dtype=np.int64)
    settled = np.empty(n_slots, dtype=np.uint8)
    cap = adj_node.shape[0] + 1
    heap_d = np.empty(cap)
    heap_n = np.empty(cap, dtype=np.int64)

    p = 0.0
    for i in range(n):
        p += intercept[i] * y[i] + 0.5 * slope[i] * y[i] * y[i]
    pot[0] = p

    for t in range(T + 1):
        gy = 0.0
        for i in range(n):
            g[i] = intercept[i] + slope[i] * y[i]
            if g[i] < 0.0:
                return 1, y, pot, gamma, gap, chosen
            gy += g[i] * y[i]

        for i in range(n_slots):
            dist[i] = math.inf
            pred_edge[i] = -1
            pred_node[i] = -1
            settled[i] = 0
        dist[src] = 0.0
        heap_d[0] = 0.0
        heap_n[0] = src
        size = 1
        while size > 0:
            d0 = heap_d[0]
            u = heap_n[0]
            size -= 1
            heap_d[0] = heap_d[size]
            heap_n[0] = heap_n[size]
            i = 0
            while True:
                l = 2 * i + 1
                r = l + 1
                m = i
                if l < size and (heap_d[l] < heap_d[m] or (heap_d[l] == heap_d[m] and heap_n[l] < heap_n[m])):
                    m = l
                if r < size and (heap_d[r] < heap_d[m] or (heap_d[r] == heap_d[m] and heap_n[r] < heap_n[m])):
                    m = r
                if m == i:
                    break
                td = heap_d[i]
                tn = heap_n[i]
                heap_d[i] = heap_d[m]
                heap_n[i] = heap_n[m]
                heap_d[m] = td
                heap_n[m] = tn
                i = m
            if settled[u] == 1:
                continue
            settled[u] = 1
            if u == dst:
                break
            for k in range(indptr[u], indptr[u + 1]):
                v = adj_node[k]
                e = adj_edge[k]
                nd = d0 + g[e]
                if settled[v] == 1:
                    continue
                if nd < dist[v]:
                    dist[v] = nd
                    pred_edge[v] = e
                    pred_node[v] = u
                    j = size
                    heap_d[j] = nd
                    heap_n[j] = v
                    size += 1
                    while j > 0:
                        pp = (j - 1) // 2
                        if heap_d[j] < heap_d[pp] or (heap_d[j] == heap_d[pp] and heap_n[j] < heap_n[pp]):
                            td = heap_d[j]
                            tn = heap_n[j]
                            heap_d[j] = heap_d[pp]
                            heap_n[j] = heap_n[pp]
                            heap_d[pp] = td
                            heap_n[pp] = tn
                            j = pp
                        else:
                            break
                elif nd == dist[v] and e < pred_edge[v]:
                    pred_edge[v] = e
                    pred_node[v] = u

        if dist[dst] == math.inf:
            return 2, y, pot, gamma, gap, chosen
        gap[t] = gy - dist[dst]
        if t == T:
            break

        v = dst
        while v != src:
            chosen[t, pred_edge[v]] = 1
            v = pred_node[v]

        qa = 0.0
        qb = 0.0
        for i in range(n):
            z = chosen[t, i] - y[i]
            qa += 0.5 * slope[i] * z * z
            qb += g[i] * z
        if qa <= 1e-15:
            gam = 1.0 if qb < 0.0 else 0.0
        else:
            gam = -qb / (2.0 * qa)
            if gam < 0.0:
                gam = 0.0
            elif gam > 1.0:
                gam = 1.0
        gamma[t] = gam

        p = 0.0
        for i in range(n):
            y[i] = y[i] + gam * (chosen[t, i] - y[i])
            p += intercept[i] * y[i] + 0.5 * slope[i] * y[i] * y[i]
        pot[t + 1] = p
    return 0, y, pot, gamma, gap, chosen

# --- backend selection ------------------------------------------------------

_KERNEL_NAMES = (
    "dijkstra_sssp",
    "zdd_min_cost_dp",
    "zdd_log_count_dp",
    "zdd_log_length_dp",
    "zdd_sample_scalar",
    "zdd_sample_by_length",
    "fw_affine_zdd",
    "fw_affine_dijkstra",
)

PY_IMPL = {name: globals()[name] for name in _KERNEL_NAMES}


def _select_backend():
    requested = os.environ.get("CCG_BACKEND", "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        warnings.warn(f"unknown CCG_BACKEND={requested!r}, using numba")
        requested = "numba"
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        warnings.warn("numba unavailable, falling back to the numpy backend")
        return "numpy"
    return "numba"


ACTIVE_BACKEND = _select_backend()

if ACTIVE_BACKEND == "numba":
    from numba import njit

    for _name in _KERNEL_NAMES:
        globals()[_name] = njit(cache=True, nogil=True)(PY_IMPL[_name])
