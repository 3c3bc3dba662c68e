"""Scenario configuration, experiment execution, and desk-scale oracles.

Scenario files are versioned JSON (``scenario_version: 1``) describing the
network source, strategy family, cost model, inner solver budget, oracle kind,
and outer-loop settings.  The runner executes (variant, seed) grids, writes
one metrics CSV per run plus a cross-seed summary with 99% normal-approximation
confidence bands.

The oracles here are deliberately independent of the solver they check:
``brute_force_equilibrium`` minimizes the potential by accelerated projected
gradient over the strategy-distribution simplex (no Frank-Wolfe, no vertices),
and ``closed_form_equilibrium`` evaluates the two analytic examples (a
two-link network with a tolled second link, and the parallel network whose
equilibrium sweeps through switching windows as the scalar parameter moves).
"""

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import network as network_mod, zdd as zdd_mod
from .congestion import AffineCostModel, FractionalCost, barycenter
from .equilibrium import (
    ShortestPathLmo,
    ZddExactLmo,
    ZddSubsampledLmo,
    fw_equilibrium,
)
from .errors import CapExceededError, ValidationError
from .leader import ZoConfig, zo_stackelberg
from .network import FamilySpec, strategy_to_incidence

Z99 = 2.5758293035489004   # two-sided 99% normal quantile


# --- closed-form example models ---------------------------------------------

@dataclass(frozen=True)
class TwoLinkCost(AffineCostModel):
    """Two parallel links: link 0 costs its own load, link 1 costs a toll.

    The toll is the last theta coordinate, so the same model serves the scalar
    closed-form checks (theta = [toll]) and the 2-parameter leader embedding
    (theta on the sum-2 simplex, toll = theta[1]).
    """

    n = 2
    k = 2

    def load_slope(self, theta):
        return np.array([1.0, 0.0])

    def intercept(self, theta):
        toll = float(np.asarray(theta, dtype=np.float64).reshape(-1)[-1])
        return np.array([0.0, toll])


@dataclass(frozen=True)
class ParallelLinkCost(AffineCostModel):
    """n parallel links, cost_i = y_i + M * (-i theta + i(i-1)/2), i = 1..n.

    A scalar parameter sweeps which link is cheapest; the equilibrium is
    piecewise linear with switching windows of width 2/M around each integer.
    """

    links: int
    M: float

    @property
    def n(self):
        return self.links

    @property
    def k(self):
        return 1

    def load_slope(self, theta):
        return np.ones(self.links)

    def intercept(self, theta):
        th = float(np.asarray(theta, dtype=np.float64).reshape(-1)[-1])
        i = np.arange(1, self.links + 1, dtype=np.float64)
        return self.M * (-i * th + i * (i - 1) / 2.0)


def singleton_family(n):
    """Diagram for the parallel-link family {{0}, ..., {n-1}}."""
    return zdd_mod.from_strategies(n, [{i} for i in range(n)])


def closed_form_equilibrium(example, theta, n=None, M=None):
    """Analytic equilibrium loads of the bundled examples.

    two_link: y = (clip(toll, 0, 1), 1 - clip(toll, 0, 1)).
    parallel_kinks: inside the window |theta - i| <= 1/M the two neighbors
    split as y_i = 1/2 + (M/2)(i - theta); between windows the equilibrium is
    the pure vertex.  Out-of-range theta raises ValidationError.
    """
    if example == "two_link":
        toll = float(np.asarray(theta).reshape(-1)[-1])
        y1 = min(1.0, max(0.0, toll))
        return np.array([y1, 1.0 - y1])
    if example != "parallel_kinks":
        raise ValidationError(f"unknown example {example!r}")
    if n is None or M is None:
        raise ValidationError("parallel_kinks needs n and M")
    if n < 3 or M <= 2:
        raise ValidationError("parallel_kinks needs n >= 3 and M > 2")
    th = float(np.asarray(theta).reshape(-1)[-1])
    inv = 1.0 / M
    if not (inv <= th <= n - 1 - inv):
        raise ValidationError(
            f"theta {th} outside the closed form's domain [{inv}, {n - 1 - inv}]"
        )
    y = np.zeros(n)
    for i in range(1, n - 1):
        if i - inv <= th <= i + inv:
            yi = 0.5 + (M / 2.0) * (i - th)
            y[i - 1] = yi
            y[i] = 1.0 - yi
            return y
    for i in range(1, n):
        if i - 1 + inv <= th <= i - inv:
            y[i - 1] = 1.0
            return y
    raise ValidationError(f"theta {th} fell between regions (rounding)")


# --- brute-force oracles ------------------------------------------------------

def brute_force_equilibrium(model, theta, strategies, tol=1e-12, max_iter=500_000):
    """Potential minimizer over the strategy-distribution simplex.

    Accelerated projected gradient on z (the mixing weights), terminated when
    the simplex linear-programming gap certifies suboptimality below 1e-10 in
    potential.  Independent of the Frank-Wolfe path it is used to check.
    """
    strategies = list(strategies)
    if len(strategies) > 50:
        raise CapExceededError(f"{len(strategies)} strategies exceeds the oracle cap of 50")
    if not strategies:
        raise ValidationError("empty family")
    if not isinstance(model, AffineCostModel):
        raise ValidationError("oracle requires an affine-in-load model")
    theta = np.asarray(theta, dtype=np.float64)
    n = model.n
    E = np.zeros((len(strategies), n))
    for i, s in enumerate(strategies):
        E[i, list(s)] = 1.0
    a = np.asarray(model.load_slope(theta), dtype=np.float64)
    b = np.asarray(model.intercept(theta), dtype=np.float64)

    H = (E * a) @ E.T
    L = max(float(np.linalg.eigvalsh(H).max()), 1e-12)
    K = len(strategies)
    z = np.full(K, 1.0 / K)
    zp = z.copy()
    tk = 1.0

    def grad(zv):
        y = E.T @ zv
        return E @ (b + a * y)

    for _ in range(max_iter):
        g = grad(z)
        lp_gap = float(g @ z - g.min())
        if lp_gap <= tol:
            break
        w = z + ((tk - 1.0) / (tk + 2.0)) * (z - zp)
        gw = grad(w)
        znew = _project_simplex(w - gw / L, 1.0)
        zp, z = z, znew
        tk += 1.0
    return E.T @ z


def _project_simplex(v, total):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    j = np.arange(1, len(v) + 1)
    rho = np.max(np.flatnonzero(u - css / j > 0))
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


@dataclass(frozen=True)
class ThetaSlice:
    """Affine 1-D or 2-D slice u -> origin + u1 axis1 (+ u2 axis2)."""

    origin: np.ndarray
    axes: tuple
    ranges: tuple

    def __post_init__(self):
        if len(self.axes) != len(self.ranges) or not 1 <= len(self.axes) <= 2:
            raise ValidationError("slice must have 1 or 2 axes with matching ranges")


@dataclass(frozen=True)
class PhiGrid:
    params: np.ndarray
    thetas: np.ndarray
    values: np.ndarray

    @property
    def argmin(self):
        return int(np.argmin(self.values))

    @property
    def grid_min(self):
        return float(self.values[self.argmin])


def brute_force_phi(model, strategies, slc, resolution):
    """Tabulate the equilibrium social cost over a parameter slice."""
    grids = [np.linspace(lo, hi, resolution) for lo, hi in slc.ranges]
    if len(grids) == 1:
        params = grids[0][:, None]
    else:
        aa, bb = np.meshgrid(grids[0], grids[1], indexing="ij")
        params = np.column_stack([aa.ravel(), bb.ravel()])
    thetas = np.array(
        [slc.origin + sum(u * ax for u, ax in zip(row, slc.axes)) for row in params]
    )
    values = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        y = brute_force_equilibrium(model, th, strategies)
        values[i] = model.social_cost(th, y)
    return PhiGrid(params=params, thetas=thetas, values=values)


# --- scenario configuration ---------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    model: object
    n: int
    k: int
    theta_total: float
    theta0: np.ndarray | None
    T: int
    gap_every: int
    lmo: object
    zo: ZoConfig
    out_dir: str
    variants: dict
    net: object = None
    family: FamilySpec | None = None
    zdd: object = None
    source: str = ""

    def with_lmo(self, lmo):
        return replace(self, lmo=lmo)

    def eval_phi_hat(self, theta, seed):
        """One objective probe: inner equilibrium solve, then social cost."""
        fw = fw_equilibrium(
            self.model, theta, self.T, self.lmo, seed=seed, gap_every=0
        )
        return self.model.social_cost(theta, fw.y), fw.final_gap

    def per_eval_counts(self):
        """(lmo_calls, samples_drawn) of one probe; closed-form, not measured."""
        if isinstance(self.lmo, ZddSubsampledLmo):
            return self.T + 2, self.lmo.m * (self.T + 1)
        return self.T + 2, 0


def _build_lmo(cfg, net, family, diagram, n, cache_dir=None):
    kind = cfg.get("kind", "zdd_exact")
    if kind == "shortest_path":
        if net is None or family is None or family.kind != "st_paths":
            raise ValidationError("shortest_path LMO needs a network st_paths family")
        return ShortestPathLmo(net, family.s, family.t)
    if diagram is None:
        raise ValidationError("no diagram available for a zdd LMO")
    if kind == "zdd_exact":
        return ZddExactLmo(diagram)
    if kind == "zdd_subsampled":
        scheme = zdd_mod.SamplingScheme(cfg.get("scheme", "US"))
        return ZddSubsampledLmo(diagram, scheme, int(cfg.get("m", 1)))
    raise ValidationError(f"unknown lmo kind {kind!r}")


def _family_cache_key(net, family, var_order):
    payload = repr((net.edges, family, tuple(var_order or range(net.n)))).encode()
    return hashlib.sha256(payload).hexdigest()[:24]


def diagram_for(net, family, cache_dir=None, var_order=None):
    """Compile (or load from cache) the family diagram for a network."""
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        path = cache_dir / f"{_family_cache_key(net, family, var_order)}.zdd1"
        if path.exists():
            return zdd_mod.load_zdd(path)
        diagram = zdd_mod.build_family(net, family, var_order=var_order)
        zdd_mod.save_zdd(diagram, path)
        return diagram
    return zdd_mod.build_family(net, family, var_order=var_order)


def load_scenario(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.get("scenario_version") != 1:
        raise ValidationError(
            f"{path}: unsupported scenario_version {raw.get('scenario_version')!r}"
        )
    base = path.parent

    net = None
    family = None
    diagram = None
    net_cfg = raw.get("network", {})
    net_kind = net_cfg.get("kind")
    if net_kind == "parallel_links":
        n = int(net_cfg["n"])
        diagram = singleton_family(n)
    elif net_kind in ("tntp", "inline"):
        if net_kind == "tntp":
            coords = net_cfg.get("coords")
            net = network_mod.load_network(
                base / net_cfg["path"],
                coords_path=base / coords if coords else None,
            )
        else:
            arcs = tuple(
                network_mod.Arc(int(u), int(v), float(w))
                for u, v, w in net_cfg["edges"]
            )
            directed = network_mod.DirectedNetwork(int(net_cfg["node_count"]), arcs)
            net = network_mod.normalize_freeflow(network_mod.symmetrize(directed))
        if net_cfg.get("subgraph_nodes"):
            net = network_mod.induced_subgraph(net, net_cfg["subgraph_nodes"])
            net = network_mod.normalize_freeflow(net)
        if net_cfg.get("edge_weight") == "euclidean":
            net = network_mod.normalize_freeflow(network_mod.euclidean_weights(net))
        n = net.n
        fam_cfg = raw.get("family")
        if fam_cfg:
            kind = fam_cfg["kind"]
            if kind in ("st_paths", "hamiltonian_st_paths"):
                family = FamilySpec(kind, s=int(fam_cfg["s"]), t=int(fam_cfg["t"]))
            else:
                family = FamilySpec(kind, terminals=tuple(fam_cfg["terminals"]))
            if raw.get("lmo", {}).get("kind", "zdd_exact") != "shortest_path":
                diagram = diagram_for(
                    net, family,
                    cache_dir=(base / raw["lmo"]["cache_dir"]) if raw.get("lmo", {}).get("cache_dir") else None,
                    var_order=raw.get("var_order"),
                )
    else:
        raise ValidationError(f"unknown network kind {net_kind!r}")

    cost = raw.get("cost", {})
    fam_name = cost.get("family", "fractional")
    if fam_name == "fractional":
        d = np.asarray(cost["d"], dtype=np.float64) if "d" in cost else (
            net.d if net is not None else np.ones(n)
        )
        model = FractionalCost(d=d, c_scale=float(cost.get("C", 1.0)))
    elif fam_name == "two_link":
        if n != 2:
            raise ValidationError("two_link cost needs exactly 2 resources")
        model = TwoLinkCost()
    elif fam_name == "parallel_kinks":
        model = ParallelLinkCost(links=n, M=float(cost.get("M", 4.0)))
    else:
        raise ValidationError(f"unknown cost family {fam_name!r}")

    inner = raw.get("inner", {})
    T = int(inner.get("T", 3000))
    gap_every = int(inner.get("gap_every", 100))
    lmo = _build_lmo(raw.get("lmo", {"kind": "zdd_exact"}), net, family, diagram, n)

    zo_cfg = raw.get("zo", {})
    zo = ZoConfig(
        K=int(zo_cfg.get("K", 100)),
        B=int(zo_cfg.get("B", 4)),
        rho=float(zo_cfg.get("rho", 0.05)),
        eta=float(zo_cfg.get("eta", 0.05)),
        directions=zo_cfg.get("directions", "sphere"),
        interiorize=bool(zo_cfg.get("interiorize", False)),
        seed=int(zo_cfg.get("seed", 0)),
    )
    k = model.k
    theta_total = float(raw.get("theta_total", k))
    theta0_cfg = raw.get("theta0", "barycenter")
    theta0 = None if theta0_cfg == "barycenter" else np.asarray(theta0_cfg, dtype=np.float64)

    variants = {}
    for var in raw.get("variants", []):
        variants[var["label"]] = _build_lmo(var["lmo"], net, family, diagram, n)
    if not variants:
        variants = {"default": lmo}

    return Scenario(
        name=raw.get("name", path.stem),
        model=model, n=n, k=k, theta_total=theta_total, theta0=theta0,
        T=T, gap_every=gap_every, lmo=lmo, zo=zo,
        out_dir=raw.get("out_dir", "results"),
        variants=variants, net=net, family=family, zdd=diagram,
        source=str(path),
    )


# --- experiment runner ---------------------------------------------------------

RUN_COLUMNS = (
    "run_id", "seed", "outer_iter", "phi_hat", "fw_gap", "wall_ms",
    "peak_memory_bytes", "lmo_calls", "samples_drawn",
)
SUMMARY_COLUMNS = (
    "variant", "outer_iter", "phi_mean", "phi_ci99_lo", "phi_ci99_hi",
    "gap_mean", "wall_ms_mean",
)


def _peak_memory_bytes():
    try:
        import resource
        return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    except Exception:
        return None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_scenario(scenario, repetitions, seeds=None, workers=1, out_dir=None):
    """Execute every (variant, seed) pair and emit per-run plus summary CSVs.

    Individual run failures are recorded in failures.csv; surviving runs still
    produce the summary.  Returns the list of written per-run CSV paths.
    """
    if seeds is None:
        seeds = list(range(repetitions))
    out = Path(out_dir if out_dir is not None else scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(label, seed) for label in scenario.variants for seed in seeds]

    def one_run(job):
        label, seed = job
        scn = scenario.with_lmo(scenario.variants[label])
        cfg = replace(scn.zo, seed=int(seed))
        trace = zo_stackelberg(scn, cfg)
        return label, seed, scn, trace

    results = []
    failures = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(one_run, job): job for job in jobs}
            for fut, job in futs.items():
                try:
                    results.append(fut.result())
                except Exception as exc:   # noqa: BLE001 - recorded, run continues
                    failures.append((f"{job[0]}-s{job[1]}", repr(exc)))
    else:
        for job in jobs:
            try:
                results.append(one_run(job))
            except Exception as exc:   # noqa: BLE001
                failures.append((f"{job[0]}-s{job[1]}", repr(exc)))

    results.sort(key=lambda r: (r[0], r[1]))
    written = []
    by_variant = {}
    peak = _peak_memory_bytes()
    for label, seed, scn, trace in results:
        run_id = f"{label}-s{seed}"
        calls_per_eval, samples_per_eval = scn.per_eval_counts()
        evals_per_iter = 2 * scn.zo.B + 1
        rows = []
        cum_evals = 0
        for t in range(len(trace.phi_hat)):
            cum_evals += evals_per_iter if t < len(trace.ghat_norm) else 1
            rows.append((
                run_id, seed, t, float(trace.phi_hat[t]),
                float(trace.max_inner_gap[t]), float(trace.wall_ms[t]),
                peak, cum_evals * calls_per_eval, cum_evals * samples_per_eval,
            ))
        path = out / f"{run_id}.csv"
        write_csv(path, RUN_COLUMNS, rows)
        written.append(path)
        by_variant.setdefault(label, []).append(trace)

    summary_rows = []
    for label in sorted(by_variant):
        traces = by_variant[label]
        phis = np.array([tr.phi_hat for tr in traces])
        gaps = np.array([tr.max_inner_gap for tr in traces])
        walls = np.array([tr.wall_ms for tr in traces])
        R = len(traces)
        mean = phis.mean(axis=0)
        if R > 1:
            half = Z99 * phis.std(axis=0, ddof=1) / math.sqrt(R)
        else:
            half = np.zeros_like(mean)
        for t in range(phis.shape[1]):
            summary_rows.append((
                label, t, float(mean[t]), float(mean[t] - half[t]),
                float(mean[t] + half[t]), float(gaps[:, t].mean()),
                float(walls[:, t].mean()),
            ))
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    if failures:
        write_csv(out / "failures.csv", ("run_id", "error"), failures)
    return written
