"""Zero-suppressed decision diagram engine for combinatorial strategy families.

A diagram stores a family of resource subsets as a DAG: node ids are array
indices with 0 = reject terminal, 1 = accept terminal, internal nodes from 2
upward topologically ordered (both children of v have ids < v).  Root-to-accept
paths encode strategies; taking a hi arc includes the node's resource, skipped
resources are excluded.  Diagrams are reduced: no node has a reject hi child
(zero-suppression) and no two nodes share (label, lo, hi) (merge rule), which
makes them canonical for a fixed variable order.

Compilation uses a frontier dynamic program over the edge sequence.  The state
is a mate array restricted to the frontier: mate[v] = v means v has no chosen
edge yet, mate[v] = u means v is an endpoint of a chosen-edge fragment whose
other end is u, and mate[v] = SATURATED means v's degree is maxed out.  Family
kinds differ only in their degree caps, completion rule, and the checks applied
when a node leaves the frontier.

Counting and sampling run in the log domain (with exact big-integer side
channels for verification); min-cost and sampling traversals live in the
numba-backed kernels of :mod:`ccg._kernels`.
"""

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import CapExceededError, EmptyFamilyError, ValidationError

SATURATED = -1

_BOT = -1   # child sentinel: reject terminal
_TOP = -2   # child sentinel: accept terminal


@dataclass(frozen=True, eq=False)
class Zdd:
    n: int                  # number of resources
    label: np.ndarray       # int64, len = num internal + 2, label[0] = label[1] = -1
    lo: np.ndarray
    hi: np.ndarray
    root: int
    var_order: tuple        # permutation of range(n)

    @property
    def num_internal(self):
        return len(self.label) - 2

    @cached_property
    def level_of(self):
        """Map resource index -> position in the variable order."""
        pos = {r: i for i, r in enumerate(self.var_order)}
        return pos

    @cached_property
    def log_counts(self):
        return _kernels.zdd_log_count_dp(self.lo, self.hi)

    @cached_property
    def exact_count(self):
        num = len(self.lo)
        counts = [0] * num
        counts[1] = 1
        for v in range(2, num):
            counts[v] = counts[self.lo[v]] + counts[self.hi[v]]
        return counts[self.root]

    @cached_property
    def max_length_bound(self):
        return len({int(l) for l in self.label[2:]})

    @cached_property
    def depth_cap(self):
        return self.max_length_bound + 1


class CountResult(NamedTuple):
    exact: int
    log: float


def check_structure(zdd):
    """Assert the reduction invariants; raises ValidationError on violation."""
    num = len(zdd.label)
    if len(zdd.lo) != num or len(zdd.hi) != num:
        raise ValidationError("node arrays have inconsistent lengths")
    if not (0 <= zdd.root < num):
        raise ValidationError("root out of range")
    seen = set()
    pos = zdd.level_of
    for v in range(2, num):
        l, lo, hi = int(zdd.label[v]), int(zdd.lo[v]), int(zdd.hi[v])
        if not (0 <= l < zdd.n):
            raise ValidationError(f"node {v}: label {l} out of range")
        if lo >= v or hi >= v:
            raise ValidationError(f"node {v}: children must precede it")
        if hi == 0:
            raise ValidationError(f"node {v}: hi child is the reject terminal")
        key = (l, lo, hi)
        if key in seen:
            raise ValidationError(f"node {v}: duplicate (label, lo, hi) {key}")
        seen.add(key)
        for c in (lo, hi):
            if c >= 2 and pos[int(zdd.label[c])] <= pos[l]:
                raise ValidationError(f"node {v}: label order violated toward child {c}")
    reachable = {zdd.root}
    stack = [zdd.root]
    while stack:
        v = stack.pop()
        if v < 2:
            continue
        for c in (int(zdd.lo[v]), int(zdd.hi[v])):
            if c not in reachable:
                reachable.add(c)
                stack.append(c)
    for v in range(2, num):
        if v not in reachable:
            raise ValidationError(f"node {v} unreachable from root")
    return True


def _assemble(n, node_rows, root, var_order):
    num = len(node_rows) + 2
    label = np.full(num, -1, dtype=np.int64)
    lo = np.zeros(num, dtype=np.int64)
    hi = np.zeros(num, dtype=np.int64)
    for i, (l, lo_id, hi_id) in enumerate(node_rows):
        label[i + 2] = l
        lo[i + 2] = lo_id
        hi[i + 2] = hi_id
    return Zdd(n=n, label=label, lo=lo, hi=hi, root=root, var_order=tuple(var_order))


def terminal_zdd(n, accept, var_order=None):
    order = tuple(range(n)) if var_order is None else tuple(var_order)
    return _assemble(n, [], 1 if accept else 0, order)


def _resolve_order(n, var_order):
    if var_order is None:
        return tuple(range(n))
    order = tuple(int(i) for i in var_order)
    if sorted(order) != list(range(n)):
        raise ValidationError("var_order must be a permutation of range(n)")
    return order


def build_family(net, spec, var_order=None):
    """Compile a FamilySpec over a network's edges into a reduced diagram.

    Infeasible specs (no strategy exists) yield a reject-rooted diagram, not
    an error.  Endpoints/terminals must exist in the network.
    """
    n = net.n
    order = _resolve_order(n, var_order)
    kind = spec.kind
    is_path = kind in ("st_paths", "hamiltonian_st_paths")
    nodes = net.nodes
    if is_path:
        s, t = spec.s, spec.t
        for w in (s, t):
            if w not in nodes:
                raise ValidationError(f"endpoint {w} not in the network")
        forced = (s, t)
        terminals = frozenset()
    else:
        terminals = frozenset(spec.terminals)
        for w in terminals:
            if w not in nodes:
                raise ValidationError(f"terminal {w} not in the network")
        s = t = None
        forced = ()
    if n == 0:
        return terminal_zdd(0, accept=False)

    edges_seq = [net.edges[order[i]] for i in range(n)]
    first_pos = {}
    last_pos = {}
    for i, (u, v) in enumerate(edges_seq):
        for w in (u, v):
            first_pos.setdefault(w, i)
            last_pos[w] = i
    for w in forced:
        first_pos[w] = 0
        last_pos[w] = n - 1

    # per-level frontier bookkeeping: states are mate tuples aligned with the
    # sorted tracked-node list of their level, so no per-transition sorting
    all_nodes = sorted(first_pos)
    tracked = [
        [w for w in all_nodes if first_pos[w] <= i <= last_pos[w]] for i in range(n)
    ]
    tracked.append([])
    pos_at = [{w: p for p, w in enumerate(lvl)} for lvl in tracked]
    endpoint_pos = [(pos_at[i][u], pos_at[i][v]) for i, (u, v) in enumerate(edges_seq)]
    exits = [
        [(pos_at[i][w], w) for w in tracked[i] if last_pos[w] == i] for i in range(n)
    ]
    carry = [
        [(pos_at[i].get(w, -1), w) for w in tracked[i + 1]] for i in range(n)
    ]

    def exit_ok(w, val, completed):
        if is_path:
            if w == s or w == t:
                return val != w
            if kind == "hamiltonian_st_paths":
                return val == SATURATED
            return val == w or val == SATURATED
        if w in terminals:
            return val == SATURATED
        return val == w or val == SATURATED

    def child(completed, mates, level, take):
        """Apply one decision; returns the follow-up state or None for reject."""
        u, v = edges_seq[level]
        up, vp = endpoint_pos[level]
        if take:
            if completed:
                return None
            mu = mates[up]
            mv = mates[vp]
            if mu == SATURATED or mv == SATURATED:
                return None
            if is_path:
                if (u == s or u == t) and mu != u:
                    return None
                if (v == s or v == t) and mv != v:
                    return None
            pos = pos_at[level]
            new = list(mates)
            if mu == v:
                # u, v are the two ends of one fragment: closing a cycle
                if kind != "steiner_cycles":
                    return None
                new[up] = SATURATED
                new[vp] = SATURATED
                completed = True
            else:
                a, b = mu, mv
                new[up] = SATURATED
                new[vp] = SATURATED
                if is_path and ((a == s and b == t) or (a == t and b == s)):
                    completed = True
                    new[pos[a]] = SATURATED
                    new[pos[b]] = SATURATED
                else:
                    new[pos[a]] = b
                    new[pos[b]] = a
        else:
            new = mates
        for p, w in exits[level]:
            if not exit_ok(w, new[p], completed):
                return None
        return completed, tuple(new[c] if c >= 0 else w for c, w in carry[level])

    init = (False, tuple(tracked[0]))
    level_payload = [[init]]
    level_children = []
    for i in range(n):
        states = level_payload[i]
        children = []
        next_index = {}
        next_payload = []
        last = i == n - 1
        for state in states:
            pair = []
            for take in (False, True):
                res = child(state[0], state[1], i, take)
                if res is None:
                    pair.append(_BOT)
                elif last:
                    pair.append(_TOP if res[0] else _BOT)
                else:
                    slot = next_index.get(res)
                    if slot is None:
                        slot = len(next_payload)
                        next_index[res] = slot
                        next_payload.append(res)
                    pair.append(slot)
            children.append((pair[0], pair[1]))
        level_children.append(children)
        if not last:
            level_payload.append(next_payload)

    unique = {}
    node_rows = []
    canon_next = {}

    def resolve(c, canon):
        if c == _BOT:
            return 0
        if c == _TOP:
            return 1
        return canon[c]

    for i in reversed(range(n)):
        canon_i = {}
        for slot, (lo_c, hi_c) in enumerate(level_children[i]):
            lo_id = resolve(lo_c, canon_next)
            hi_id = resolve(hi_c, canon_next)
            if hi_id == 0:
                canon_i[slot] = lo_id
                continue
            key = (order[i], lo_id, hi_id)
            nid = unique.get(key)
            if nid is None:
                nid = len(node_rows) + 2
                node_rows.append(key)
                unique[key] = nid
            canon_i[slot] = nid
        canon_next = canon_i
    root = canon_next[0]

    # drop nodes that lost all parents to zero-suppression
    zdd = _assemble(n, node_rows, root, order)
    return _prune_unreachable(zdd)


def _prune_unreachable(zdd):
    num = len(zdd.label)
    keep = np.zeros(num, dtype=bool)
    keep[0] = keep[1] = True
    stack = [zdd.root]
    keep[zdd.root] = True
    while stack:
        v = stack.pop()
        if v < 2:
            continue
        for c in (int(zdd.lo[v]), int(zdd.hi[v])):
            if not keep[c]:
                keep[c] = True
                stack.append(c)
    if keep.all():
        return zdd
    remap = np.cumsum(keep) - 1
    rows = []
    for v in range(2, num):
        if keep[v]:
            rows.append((int(zdd.label[v]), int(remap[zdd.lo[v]]), int(remap[zdd.hi[v]])))
    return _assemble(zdd.n, rows, int(remap[zdd.root]), zdd.var_order)


def from_strategies(n, strategies, var_order=None):
    """Canonical diagram for an explicitly listed family of resource subsets."""
    order = _resolve_order(n, var_order)
    fam = set()
    for sset in strategies:
        sset = frozenset(int(i) for i in sset)
        for i in sset:
            if not (0 <= i < n):
                raise ValidationError(f"resource index {i} out of range")
        fam.add(sset)
    unique = {}
    node_rows = []
    memo = {}

    def build(family, level):
        if not family:
            return 0
        if level == n:
            return 1
        key = (family, level)
        got = memo.get(key)
        if got is not None:
            return got
        var = order[level]
        lo_fam = frozenset(S for S in family if var not in S)
        hi_fam = frozenset(S - {var} for S in family if var in S)
        lo_id = build(lo_fam, level + 1)
        hi_id = build(hi_fam, level + 1)
        if hi_id == 0:
            nid = lo_id
        else:
            nkey = (var, lo_id, hi_id)
            nid = unique.get(nkey)
            if nid is None:
                nid = len(node_rows) + 2
                node_rows.append(nkey)
                unique[nkey] = nid
        memo[key] = nid
        return nid

    root = build(frozenset(fam), 0)
    return _assemble(n, node_rows, root, order)


def enumerate_strategies(zdd, cap=100000):
    """Exact family as a set of sorted index tuples; errors past the cap."""
    total = zdd.exact_count
    if total > cap:
        raise CapExceededError(f"family has {total} strategies, cap is {cap}")
    out = set()
    stack = [(zdd.root, ())]
    while stack:
        v, acc = stack.pop()
        if v == 0:
            continue
        if v == 1:
            out.add(tuple(sorted(acc)))
            continue
        stack.append((int(zdd.lo[v]), acc))
        stack.append((int(zdd.hi[v]), acc + (int(zdd.label[v]),)))
    return out


def count(zdd):
    """Family cardinality: exact big integer plus the log-domain value."""
    return CountResult(exact=zdd.exact_count, log=float(zdd.log_counts[zdd.root]))


def min_cost(zdd, weights):
    """Minimum additive weight strategy (exact LMO); ties go toward lo."""
    if zdd.root == 0:
        raise EmptyFamilyError("min_cost on an empty family")
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.shape != (zdd.n,):
        raise ValidationError(f"weights must have shape ({zdd.n},)")
    cost, inc = _kernels.zdd_min_cost_dp(zdd.label, zdd.lo, zdd.hi, weights, zdd.root)
    return tuple(int(i) for i in np.flatnonzero(inc)), float(cost)


@dataclass(frozen=True)
class LengthCountTable:
    """Per-node log counts split by remaining strategy length."""

    log_table: np.ndarray   # (num nodes, lmax + 1)
    lmax: int
    root: int

    @property
    def feasible_lengths(self):
        row = self.log_table[self.root]
        return tuple(int(r) for r in np.flatnonzero(row > -np.inf))


def count_by_length(zdd):
    cached = zdd.__dict__.get("_length_table")
    if cached is not None:
        return cached
    lmax = zdd.max_length_bound
    table = _kernels.zdd_log_length_dp(zdd.lo, zdd.hi, lmax)
    result = LengthCountTable(log_table=table, lmax=lmax, root=zdd.root)
    zdd.__dict__["_length_table"] = result
    return result


def exact_length_counts(zdd):
    """Exact big-integer N_r(root) per length (verification side channel)."""
    lmax = zdd.max_length_bound
    num = len(zdd.lo)
    rows = [[0] * (lmax + 1) for _ in range(num)]
    rows[1][0] = 1
    for v in range(2, num):
        lo_row = rows[zdd.lo[v]]
        hi_row = rows[zdd.hi[v]]
        rows[v] = [lo_row[r] + (hi_row[r - 1] if r > 0 else 0) for r in range(lmax + 1)]
    return {r: c for r, c in enumerate(rows[zdd.root]) if c > 0}


@dataclass(frozen=True)
class SamplingScheme:
    """How strategies are drawn: uniform (US) or length-stratified (UL/HL).

    US draws uniformly over the family.  UL picks a feasible length uniformly,
    HL picks length r with probability proportional to 1/r (lengths >= 1 only);
    both then draw uniformly inside the chosen length stratum.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("US", "UL", "HL"):
            raise ValidationError(f"unknown sampling scheme {self.kind!r}")


def length_distribution(zdd, scheme):
    """(lengths, probabilities) of the stratum draw for a scheme on a family."""
    table = count_by_length(zdd)
    feasible = table.feasible_lengths
    if not feasible:
        raise EmptyFamilyError("no feasible lengths in an empty family")
    if scheme.kind == "US":
        logs = table.log_table[zdd.root, list(feasible)]
        w = np.exp(logs - logs.max())
    elif scheme.kind == "UL":
        w = np.ones(len(feasible))
    else:
        feasible = tuple(r for r in feasible if r >= 1)
        if not feasible:
            raise ValidationError("harmonic-length weights undefined when only length 0 is feasible")
        w = 1.0 / np.array(feasible, dtype=np.float64)
    return np.array(feasible, dtype=np.int64), w / w.sum()


def _sample_incidence(zdd, scheme, m, rng):
    if zdd.root == 0:
        raise EmptyFamilyError("sampling from an empty family")
    if m < 1:
        raise ValidationError("sample count must be positive")
    if scheme.kind == "US":
        uniforms = rng.random((m, zdd.depth_cap))
        return _kernels.zdd_sample_scalar(
            zdd.label, zdd.lo, zdd.hi, zdd.log_counts, zdd.root, uniforms, zdd.n
        )
    lengths, probs = length_distribution(zdd, scheme)
    picks = np.searchsorted(np.cumsum(probs), rng.random(m), side="right")
    picks = np.minimum(picks, len(lengths) - 1)
    targets = lengths[picks]
    uniforms = rng.random((m, zdd.depth_cap))
    table = count_by_length(zdd)
    return _kernels.zdd_sample_by_length(
        zdd.label, zdd.lo, zdd.hi, table.log_table, zdd.root, targets, uniforms, zdd.n
    )


def sample(zdd, scheme, m, seed):
    """m i.i.d. strategy draws under the scheme; deterministic given seed."""
    rng = np.random.default_rng(seed)
    inc = _sample_incidence(zdd, scheme, m, rng)
    return [tuple(int(i) for i in np.flatnonzero(row)) for row in inc]


def subsampled_lmo(zdd, scheme, m, weights, seed):
    """Best of m sampled strategies under additive weights.

    Ties break toward the smaller sample index.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    inc = _sample_incidence(zdd, scheme, m, rng)
    costs = inc.astype(np.float64) @ weights
    best = int(np.argmin(costs))
    return tuple(int(i) for i in np.flatnonzero(inc[best])), float(costs[best])


def strategy_mass(zdd, scheme, strategy):
    """Probability the scheme assigns to one strategy (enumeration-free)."""
    counts = exact_length_counts(zdd)
    lengths, probs = length_distribution(zdd, scheme)
    r = len(strategy)
    idx = np.flatnonzero(lengths == r)
    if len(idx) == 0:
        return 0.0
    return float(probs[idx[0]]) / counts[r]


def optimizer_mass(zdd, scheme, weights, cap=100000):
    """Exact probability mass the scheme puts on the argmin set (test oracle)."""
    weights = np.asarray(weights, dtype=np.float64)
    fam = sorted(enumerate_strategies(zdd, cap=cap))
    if not fam:
        raise EmptyFamilyError("optimizer_mass on an empty family")
    inc = np.zeros((len(fam), zdd.n))
    for i, strat in enumerate(fam):
        inc[i, list(strat)] = 1.0
    costs = inc @ weights
    best = costs.min()
    total = 0.0
    for strat, c in zip(fam, costs):
        if c == best:
            total += strategy_mass(zdd, scheme, strat)
    return total


_MAGIC = b"ZDD1"


def save_zdd(zdd, path):
    """Binary cache: magic ZDD1, u32 n / node count / root, u32 variable order,
    then little-endian (label, lo, hi) u32 triples with terminals as ids 0/1."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", zdd.n, zdd.num_internal, zdd.root))
        fh.write(struct.pack(f"<{zdd.n}I", *zdd.var_order))
        triples = np.empty((zdd.num_internal, 3), dtype="<u4")
        triples[:, 0] = zdd.label[2:]
        triples[:, 1] = zdd.lo[2:]
        triples[:, 2] = zdd.hi[2:]
        fh.write(triples.tobytes())


def load_zdd(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}, expected ZDD1")
        n, num, root = struct.unpack("<III", fh.read(12))
        order = struct.unpack(f"<{n}I", fh.read(4 * n)) if n else ()
        raw = fh.read(12 * num)
        if len(raw) != 12 * num:
            raise ValidationError(f"{path}: truncated node array")
        triples = np.frombuffer(raw, dtype="<u4").reshape(num, 3)
    rows = [(int(a), int(b), int(c)) for a, b, c in triples]
    zdd = _assemble(n, rows, root, tuple(int(i) for i in order))
    check_structure(zdd)
    return zdd
