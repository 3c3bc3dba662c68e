"""Frank-Wolfe equilibrium solver over the load polytope with pluggable LMOs.

Each iteration linearizes the congestion potential at the current load,
asks an oracle for a minimum-weight strategy (shortest path, exact diagram
min-cost, or best-of-m sampled), and moves by exact line search along the
segment toward that vertex.  The duality gap <g, y - s*> certifies
suboptimality whenever an exact oracle evaluates s*.

Affine-in-load models with exact oracles run in fused numba kernels; the
sampled oracle and non-affine models run through the interpreted loop, which
is also what the CLI uses when per-iteration wall times are wanted.
"""

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels, zdd as zdd_mod
from .congestion import AffineCostModel
from .errors import EmptyFamilyError, NoPathError, ValidationError
from .network import shortest_path_lmo, strategy_to_incidence

SUPPORT_EPS = 1e-12
SUPPORT_ACTIVE = 1e-6


@dataclass(frozen=True)
class ShortestPathLmo:
    """Exact LMO for s-t path families via Dijkstra on the network."""

    net: object
    s: int
    t: int
    kind = "shortest_path"

    def minimize(self, weights):
        strat = shortest_path_lmo(self.net, weights, self.s, self.t)
        w = np.asarray(weights, dtype=np.float64)
        return strat, float(w[list(strat)].sum()) if strat else 0.0


@dataclass(frozen=True)
class ZddExactLmo:
    """Exact LMO by min-cost dynamic programming over a compiled diagram."""

    zdd: object
    kind = "zdd_exact"

    def minimize(self, weights):
        return zdd_mod.min_cost(self.zdd, weights)


@dataclass(frozen=True)
class ZddSubsampledLmo:
    """Best-of-m oracle over strategies sampled from the diagram."""

    zdd: object
    scheme: zdd_mod.SamplingScheme
    m: int
    kind = "zdd_subsampled"

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("subsampled LMO needs m >= 1")

    def exact_companion(self):
        return ZddExactLmo(self.zdd)


def is_exact(lmo):
    return isinstance(lmo, (ShortestPathLmo, ZddExactLmo))


@dataclass
class FwResult:
    """Solver output: final load, per-iteration trace, and support weights."""

    y: np.ndarray
    potential: np.ndarray          # length T+1
    gamma: np.ndarray              # length T
    gap: np.ndarray                # length T+1, NaN where not audited
    iterations: int
    lmo_calls: int
    samples_drawn: int
    wall_s: float
    y0_strategy: tuple
    chosen: np.ndarray = field(repr=False)    # (T, n) uint8 vertex picks
    wall_ms: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def support(self):
        """Strategy -> cumulative weight map implied by the step sizes."""
        T = self.iterations
        keep = np.ones(T + 1)
        if T:
            one_m = 1.0 - self.gamma
            keep[:T] = np.cumprod(one_m[::-1])[::-1]
        weights = {}
        weights[self.y0_strategy] = float(keep[0])
        for t in range(T):
            w = float(self.gamma[t] * keep[t + 1])
            if w == 0.0:
                continue
            strat = tuple(int(i) for i in np.flatnonzero(self.chosen[t]))
            weights[strat] = weights.get(strat, 0.0) + w
        return {s: w for s, w in weights.items() if w >= SUPPORT_EPS}

    @property
    def final_gap(self):
        return float(self.gap[-1])


def line_search(model, theta, y, s):
    """Exact minimizer of the potential along y + gamma (s - y), gamma in [0,1].

    Affine-in-load models use the closed-form quadratic; anything else falls
    back to golden-section search with tolerance 1e-12 on gamma.
    """
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if isinstance(model, AffineCostModel):
        a = model.load_slope(theta)
        g = model.edge_costs(theta, y)
        z = s - y
        qa = 0.5 * float((a * z) @ z)
        qb = float(g @ z)
        if qa <= 1e-15:
            return 1.0 if qb < 0.0 else 0.0
        return float(min(max(-qb / (2.0 * qa), 0.0), 1.0))
    return _golden_section(lambda gam: model.potential(theta, y + gam * (s - y)))


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section(fn, tol=1e-12):
    a, b = 0.0, 1.0
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    gam = 0.5 * (a + b)
    # endpoints matter when the minimum sits on the boundary
    for cand in (0.0, 1.0):
        if fn(cand) < fn(gam):
            gam = cand
    return gam


def fw_equilibrium(model, theta, T, lmo, y0=None, seed=None, gap_every=100,
                   engine="auto"):
    """Run T Frank-Wolfe iterations from an initial strategy vertex.

    y0 defaults to the configured oracle's answer at zero load (free-flow best
    response).  The seed only drives sampled oracles; exact runs are fully
    deterministic.  Exact runs audit the duality gap at every iteration (the
    step's own oracle call provides it); sampled runs audit every `gap_every`
    iterations plus the final iterate through one exact companion call each.
    """
    if T < 1:
        raise ValidationError("T must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    n = model.n
    rng = np.random.default_rng(seed)
    subsampled = isinstance(lmo, ZddSubsampledLmo)
    start = time.perf_counter()

    lmo_calls = 0
    samples_drawn = 0
    if y0 is None:
        zero_costs = np.asarray(model.edge_costs(theta, np.zeros(n)), dtype=np.float64)
        if subsampled:
            inc0 = zdd_mod._sample_incidence(lmo.zdd, lmo.scheme, lmo.m, rng)
            costs0 = inc0.astype(np.float64) @ zero_costs
            y0 = tuple(int(i) for i in np.flatnonzero(inc0[int(np.argmin(costs0))]))
            samples_drawn += lmo.m
        else:
            y0, _ = lmo.minimize(zero_costs)
        lmo_calls += 1
    else:
        y0 = tuple(int(i) for i in y0)
    y0vec = strategy_to_incidence(y0, n).astype(np.float64)

    affine = isinstance(model, AffineCostModel)
    if engine == "auto":
        engine = "fused" if (affine and is_exact(lmo)) else "python"
    if engine == "fused" and not (affine and is_exact(lmo)):
        raise ValidationError("fused engine needs an affine model and an exact LMO")

    if engine == "fused":
        a = np.ascontiguousarray(model.load_slope(theta), dtype=np.float64)
        b = np.ascontiguousarray(model.intercept(theta), dtype=np.float64)
        if isinstance(lmo, ZddExactLmo):
            z = lmo.zdd
            if z.root == 0:
                raise EmptyFamilyError("equilibrium over an empty family")
            y, pot, gamma, gap, chosen = _kernels.fw_affine_zdd(
                z.label, z.lo, z.hi, z.root, a, b, y0vec, T
            )
        else:
            net = lmo.net
            indptr, adj_node, adj_edge = net.csr()
            status, y, pot, gamma, gap, chosen = _kernels.fw_affine_dijkstra(
                indptr, adj_node, adj_edge, net.node_count + 1,
                lmo.s, lmo.t, a, b, y0vec, T,
            )
            if status == 1:
                raise ValidationError("negative edge weight in shortest-path LMO")
            if status == 2:
                raise NoPathError(f"no path from {lmo.s} to {lmo.t}")
        lmo_calls += T + 1
        return FwResult(
            y=y, potential=pot, gamma=gamma, gap=gap, iterations=T,
            lmo_calls=lmo_calls, samples_drawn=samples_drawn,
            wall_s=time.perf_counter() - start, y0_strategy=y0, chosen=chosen,
        )

    # interpreted loop: sampled oracles, non-affine models, per-iteration timing
    exact_audit = lmo.exact_companion() if subsampled else lmo
    y = y0vec.copy()
    pot = np.empty(T + 1)
    gamma = np.empty(T)
    gap = np.full(T + 1, np.nan)
    chosen = np.zeros((T, n), dtype=np.uint8)
    wall_ms = np.empty(T + 1)
    pot[0] = model.potential(theta, y)
    wall_ms[0] = 0.0

    for t in range(T):
        g = np.asarray(model.edge_costs(theta, y), dtype=np.float64)
        gy = float(g @ y)
        if subsampled:
            inc = zdd_mod._sample_incidence(lmo.zdd, lmo.scheme, lmo.m, rng)
            costs = inc.astype(np.float64) @ g
            j = int(np.argmin(costs))
            s_vec = inc[j].astype(np.float64)
            samples_drawn += lmo.m
            lmo_calls += 1
            if gap_every > 0 and t % gap_every == 0:
                _, best = exact_audit.minimize(g)
                gap[t] = gy - best
                lmo_calls += 1
        else:
            strat, best = lmo.minimize(g)
            s_vec = strategy_to_incidence(strat, n).astype(np.float64)
            gap[t] = gy - best
            lmo_calls += 1
        chosen[t] = s_vec.astype(np.uint8)

        if affine:
            a = model.load_slope(theta)
            z = s_vec - y
            qa = 0.5 * float((a * z) @ z)
            qb = float(g @ z)
            if qa <= 1e-15:
                gam = 1.0 if qb < 0.0 else 0.0
            else:
                gam = float(min(max(-qb / (2.0 * qa), 0.0), 1.0))
        else:
            gam = line_search(model, theta, y, s_vec)
        gamma[t] = gam
        y = y + gam * (s_vec - y)
        pot[t + 1] = model.potential(theta, y)
        wall_ms[t + 1] = (time.perf_counter() - start) * 1e3

    g = np.asarray(model.edge_costs(theta, y), dtype=np.float64)
    _, best = exact_audit.minimize(g)
    gap[T] = float(g @ y) - best
    lmo_calls += 1

    return FwResult(
        y=y, potential=pot, gamma=gamma, gap=gap, iterations=T,
        lmo_calls=lmo_calls, samples_drawn=samples_drawn,
        wall_s=time.perf_counter() - start, y0_strategy=y0, chosen=chosen,
        wall_ms=wall_ms,
    )


def fw_gap(model, theta, y, lmo):
    """Exact duality gap <g, y - s*> at a load vector; certifies h <= gap."""
    if not is_exact(lmo):
        raise ValidationError("fw_gap needs an exact LMO")
    theta = np.asarray(theta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(model.edge_costs(theta, y), dtype=np.float64)
    _, best = lmo.minimize(g)
    gap = float(g @ y) - best
    if gap < -1e-9:
        raise ValidationError(f"negative duality gap {gap}: oracle inconsistent")
    return gap


def wardrop_residual(model, theta, fw, lmo):
    """Worst excess cost of a used strategy over the best response.

    Zero residual is the equilibrium condition: every strategy with positive
    mass attains the minimum cost under the induced load.
    """
    if not is_exact(lmo):
        raise ValidationError("wardrop_residual needs an exact LMO")
    support = fw.support
    if not support:
        raise ValidationError("empty support")
    g = np.asarray(model.edge_costs(theta, fw.y), dtype=np.float64)
    _, best = lmo.minimize(g)
    worst = 0.0
    for strat, w in support.items():
        if w <= SUPPORT_ACTIVE:
            continue
        cost = float(g[list(strat)].sum()) if strat else 0.0
        worst = max(worst, cost - best)
    return worst
