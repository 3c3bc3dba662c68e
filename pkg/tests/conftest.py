"""Shared fixtures: frozen benchmark instances and brute-force oracles.

The oracles here enumerate edge subsets directly (feasible for <= 12 edges)
or walk the graph, independently of the diagram machinery they validate.
"""

from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from ccg.network import Network

DATA = Path(__file__).parent / "data"


# --- frozen instances ----------------------------------------------------------

def toy_triangle():
    """Three edges, two s-t paths: the standard two-strategy teaching family."""
    return Network(node_count=3, edges=((1, 2), (1, 3), (2, 3)), d=np.ones(3))


def grid_network(rows, cols):
    """rows x cols lattice, nodes numbered row-major from 1."""
    def nid(r, c):
        return r * cols + c + 1
    edges = set()
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.add((nid(r, c), nid(r, c + 1)))
            if r + 1 < rows:
                edges.add((nid(r, c), nid(r + 1, c)))
    edges = tuple(sorted(edges))
    return Network(node_count=rows * cols, edges=edges, d=np.ones(len(edges)))


def rate_instance():
    """50-edge braided ladder whose equilibrium spreads over many paths.

    Nodes interleave columns (top 2j+1, bottom 2j+2) so the default edge order
    keeps the compilation frontier narrow.  Frozen: d ~ 0.2 + 0.8 U(seed 42),
    C = 5, s = 1, t = 26.
    """
    cols = 13
    top = [2 * j + 1 for j in range(cols)]
    bot = [2 * j + 2 for j in range(cols)]
    edges = set()
    for j in range(cols):
        edges.add((top[j], bot[j]))
    for j in range(cols - 1):
        edges.add((top[j], top[j + 1]))
        edges.add((bot[j], bot[j + 1]))
        edges.add((top[j], bot[j + 1]))
    edges.add((bot[0], top[1]))
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in edges))
    rng = np.random.default_rng(42)
    d = 0.2 + 0.8 * rng.random(len(edges))
    net = Network(node_count=26, edges=edges, d=d / d.max())
    return net, 1, 26, 5.0


def imbalanced_instance():
    """Ladder + direct shortcut: one length-1 strategy vs 2048 long ones.

    The direct edge is expensive enough to congest (d = 1, C = 4), so the
    equilibrium spreads over the shortcut plus several ladder paths; uniform
    sampling almost never sees the strategies that matter.
    """
    cols = 12
    top = [2 * j + 1 for j in range(cols)]
    bot = [2 * j + 2 for j in range(cols)]
    edges = set()
    for j in range(cols):
        edges.add((top[j], bot[j]))
    for j in range(cols - 1):
        edges.add((top[j], top[j + 1]))
        edges.add((bot[j], bot[j + 1]))
    s, t = top[0], bot[cols - 1]
    edges.add((s, t))
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in edges))
    rng = np.random.default_rng(7)
    d = 0.12 + 0.10 * rng.random(len(edges))
    d[edges.index((s, t))] = 1.0
    net = Network(node_count=2 * cols, edges=edges, d=d)
    return net, s, t, 4.0


def random_small_network(rng, max_edges=12, min_nodes=4, max_nodes=7):
    nn = int(rng.integers(min_nodes, max_nodes + 1))
    possible = [(u, v) for u in range(1, nn + 1) for v in range(u + 1, nn + 1)]
    ne = min(int(rng.integers(3, max_edges + 1)), len(possible))
    idx = rng.choice(len(possible), size=ne, replace=False)
    edges = tuple(sorted(possible[i] for i in idx))
    return Network(node_count=nn, edges=edges, d=np.ones(len(edges)))


# --- brute-force family oracles ------------------------------------------------

def _degrees(edge_idx, edges):
    deg = {}
    for i in edge_idx:
        u, v = edges[i]
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    return deg

def _connected_nonzero(edge_idx, edges):
    if not edge_idx:
        return True
    adj = {}
    for i in edge_idx:
        u, v = edges[i]
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen == set(adj)

def is_st_path(combo, edges, s, t):
    if not combo:
        return False
    deg = _degrees(combo, edges)
    if deg.get(s, 0) != 1 or deg.get(t, 0) != 1:
        return False
    if any(d != 2 for w, d in deg.items() if w not in (s, t)):
        return False
    return _connected_nonzero(combo, edges)

def is_hamiltonian_path(combo, edges, s, t, all_nodes):
    return is_st_path(combo, edges, s, t) and set(_degrees(combo, edges)) == set(all_nodes)

def is_steiner_cycle(combo, edges, terminals):
    if not combo:
        return False
    deg = _degrees(combo, edges)
    if any(d != 2 for d in deg.values()):
        return False
    if not set(terminals) <= set(deg):
        return False
    return _connected_nonzero(combo, edges)

def brute_force_family(net, predicate):
    """All edge subsets satisfying a predicate; only viable for small graphs."""
    n = net.n
    assert n <= 14, "subset enumeration oracle is for small graphs"
    out = set()
    for r in range(n + 1):
        for combo in combinations(range(n), r):
            if predicate(combo):
                out.add(tuple(combo))
    return out

def family_oracle(net, spec):
    edges = net.edges
    if spec.kind == "st_paths":
        return brute_force_family(net, lambda c: is_st_path(c, edges, spec.s, spec.t))
    if spec.kind == "hamiltonian_st_paths":
        nodes = net.nodes
        return brute_force_family(
            net, lambda c: is_hamiltonian_path(c, edges, spec.s, spec.t, nodes)
        )
    return brute_force_family(net, lambda c: is_steiner_cycle(c, edges, spec.terminals))


@pytest.fixture
def toy_net():
    return toy_triangle()
