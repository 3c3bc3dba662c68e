"""Projected zeroth-order outer loop on the scaled simplex.

The leader never differentiates through the equilibrium: it perturbs theta
along random directions, re-solves the follower equilibrium at each probe,
and averages symmetric finite differences into a gradient estimate that a
projected step consumes.  Progress is tracked through the projected gradient
mapping, which is the natural stationarity residual on a constrained set.

Sphere directions are projected onto the simplex's tangent hyperplane
(entries sum to zero) and renormalized, so probes keep the budget constraint;
Rademacher directions are used raw, matching the reported experiments, and
probe feasibility is then only guaranteed in interiorized mode.
"""

import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .congestion import barycenter, validate_theta
from .errors import ValidationError


def project_theta(v, total):
    """Euclidean projection onto {x >= 0, sum x = total} (sort and threshold)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValidationError("cannot project non-finite values")
    if total <= 0:
        raise ValidationError("projection target sum must be positive")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    j = np.arange(1, len(v) + 1)
    rho = np.max(np.flatnonzero(u - css / j > 0)) if np.any(u - css / j > 0) else 0
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def interiorize_theta(theta, rho, total):
    """Pull theta into the margin-rho relative interior of the scaled simplex.

    Probes theta +/- rho*u with unit tangent directions then stay feasible.
    """
    theta = np.asarray(theta, dtype=np.float64)
    k = len(theta)
    if total - k * rho <= 0:
        raise ValidationError(f"margin {rho} leaves no interior for sum {total}")
    return rho + project_theta(theta - rho, total - k * rho)


def gradient_mapping_norm(theta, g, eta, total):
    """Norm of the projected gradient mapping (theta - P(theta - eta g)) / eta."""
    theta = np.asarray(theta, dtype=np.float64)
    if eta <= 0:
        raise ValidationError("eta must be positive")
    step = project_theta(theta - eta * np.asarray(g, dtype=np.float64), total)
    return float(np.linalg.norm(theta - step) / eta)


def two_point_estimate(eval_phi, theta, rho, directions):
    """Averaged symmetric-difference gradient estimate along given directions.

    Makes exactly 2B oracle calls for B direction rows and scales by the
    dimension factor k/(2 rho B).
    """
    theta = np.asarray(theta, dtype=np.float64)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    B, k = directions.shape
    if k != len(theta):
        raise ValidationError("direction dimension mismatch")
    if rho <= 0:
        raise ValidationError("rho must be positive")
    ghat = np.zeros(k)
    for u in directions:
        plus = eval_phi(theta + rho * u)
        minus = eval_phi(theta - rho * u)
        ghat += (plus - minus) * u
    return ghat * (k / (2.0 * rho * B))


def sphere_directions(rng, B, k, tangent=True):
    """Unit directions, optionally confined to the sum-zero tangent hyperplane."""
    out = np.empty((B, k))
    for i in range(B):
        while True:
            u = rng.standard_normal(k)
            if tangent:
                u = u - u.mean()
            norm = np.linalg.norm(u)
            if norm > 1e-9:
                out[i] = u / norm
                break
    return out


def rademacher_directions(rng, B, k):
    return rng.integers(0, 2, size=(B, k)).astype(np.float64) * 2.0 - 1.0


@dataclass(frozen=True)
class ZoConfig:
    K: int
    B: int = 4
    rho: float = 0.05
    eta: float = 0.05
    directions: str = "sphere"
    interiorize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.K < 0 or self.B < 1:
            raise ValidationError("need K >= 0 and B >= 1")
        if self.rho <= 0 or self.eta <= 0:
            raise ValidationError("rho and eta must be positive")
        if self.directions not in ("sphere", "rademacher"):
            raise ValidationError(f"unknown direction kind {self.directions!r}")


@dataclass
class ZoTrace:
    """Per-outer-iteration record; row K holds the final iterate's audit."""

    theta: np.ndarray          # (K+1, k)
    phi_hat: np.ndarray        # (K+1,) audited objective at theta_t
    ghat_norm: np.ndarray      # (K,)
    grad_map_norm: np.ndarray  # (K,)
    wall_ms: np.ndarray        # (K+1,)
    max_inner_gap: np.ndarray  # (K+1,) worst FW gap among the audits/probes
    probe_gaps: list = field(default_factory=list)

    @property
    def final_theta(self):
        return self.theta[-1]

    @property
    def final_phi(self):
        return float(self.phi_hat[-1])

    def rows(self):
        """CSV rows: outer_iter,phi_hat,ghat_norm,grad_map_norm,wall_ms,max_inner_gap."""
        K = len(self.ghat_norm)
        for t in range(K + 1):
            yield (
                t,
                self.phi_hat[t],
                self.ghat_norm[t] if t < K else None,
                self.grad_map_norm[t] if t < K else None,
                self.wall_ms[t],
                self.max_inner_gap[t],
            )


def zo_stackelberg(scenario, cfg, workers=1):
    """Projected two-point zeroth-order descent of the equilibrium objective.

    `scenario` supplies the dimension `k`, the budget `theta_total`, the start
    `theta0`, and `eval_phi_hat(theta, seed) -> (phi, fw_gap)` which solves the
    follower equilibrium at theta and scores it.  Each outer iteration spends
    2B probe evaluations plus one audit at theta_t; randomness is pre-split per
    evaluation so a thread pool cannot change results.
    """
    k = scenario.k
    total = scenario.theta_total
    theta = np.asarray(
        scenario.theta0 if scenario.theta0 is not None else barycenter(k, total),
        dtype=np.float64,
    ).copy()
    validate_theta(theta, total)

    K, B = cfg.K, cfg.B
    thetas = np.empty((K + 1, k))
    phi = np.empty(K + 1)
    ghat_norm = np.empty(K)
    gmap_norm = np.empty(K)
    wall = np.empty(K + 1)
    max_gap = np.empty(K + 1)
    probe_gaps = []

    root_ss = np.random.SeedSequence(cfg.seed)
    iter_seeds = root_ss.spawn(K + 1)
    start = time.perf_counter()

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for t in range(K + 1):
            children = iter_seeds[t].spawn(2 * B + 2)
            dir_rng = np.random.default_rng(children[0])
            audit_seed = children[1]
            thetas[t] = theta
            last = t == K

            if cfg.directions == "sphere":
                dirs = sphere_directions(dir_rng, B, k, tangent=True)
            else:
                dirs = rademacher_directions(dir_rng, B, k)

            base = interiorize_theta(theta, cfg.rho, total) if cfg.interiorize else theta
            queries = [(base + cfg.rho * u) for u in dirs] + [(base - cfg.rho * u) for u in dirs]
            if cfg.interiorize:
                queries = [project_theta(q, total) for q in queries]

            jobs = [(theta, audit_seed)]
            if not last:
                jobs += [(q, children[2 + i]) for i, q in enumerate(queries)]
            if pool is not None:
                results = list(pool.map(lambda job: scenario.eval_phi_hat(*job), jobs))
            else:
                results = [scenario.eval_phi_hat(*job) for job in jobs]

            phi[t] = results[0][0]
            gaps = [r[1] for r in results]
            max_gap[t] = max(gaps)
            wall[t] = (time.perf_counter() - start) * 1e3
            if last:
                probe_gaps.append(tuple(gaps))
                break
            probe_gaps.append(tuple(gaps))

            plus = np.array([results[1 + i][0] for i in range(B)])
            minus = np.array([results[1 + B + i][0] for i in range(B)])
            ghat = (dirs * (plus - minus)[:, None]).sum(axis=0) * (k / (2.0 * cfg.rho * B))
            ghat_norm[t] = float(np.linalg.norm(ghat))
            gmap_norm[t] = gradient_mapping_norm(theta, ghat, cfg.eta, total)
            theta = project_theta(theta - cfg.eta * ghat, total)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    return ZoTrace(
        theta=thetas, phi_hat=phi, ghat_norm=ghat_norm, grad_map_norm=gmap_norm,
        wall_ms=wall, max_inner_gap=max_gap, probe_gaps=probe_gaps,
    )
