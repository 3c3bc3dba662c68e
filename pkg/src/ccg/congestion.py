"""Parametric congestion cost models, the potential, and the leader objective.

Every model used by the experiments is affine in load: resource i costs
c_i(y_i) = intercept_i(theta) + slope_i(theta) * y_i with slope >= 0.  The
potential integrates the cost, so it is the separable quadratic
sum_i [intercept_i y_i + slope_i y_i^2 / 2]; the leader objective is the
social cost sum_i y_i c_i(y_i).

The shipped production family is the fractional model
c_i(y_i; theta_i) = d_i (1 + C y_i / (theta_i + 1)) over the scaled simplex
{theta >= 0, sum theta = n}.  Other affine families plug in by subclassing
AffineCostModel; non-affine families only need edge_costs/potential and fall
back to a golden-section line search in the equilibrium solver.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

THETA_SUM_ATOL = 1e-9
LOAD_BAND = 1e-12


class CostModel:
    """Minimal interface the equilibrium solver needs."""

    n = 0   # number of resources
    k = 0   # leader parameter dimension

    def edge_costs(self, theta, y):
        raise NotImplementedError

    def potential(self, theta, y):
        raise NotImplementedError

    def social_cost(self, theta, y):
        y = np.asarray(y, dtype=np.float64)
        return float(y @ self.edge_costs(theta, y))


class AffineCostModel(CostModel):
    """Cost affine in load: c(y) = intercept(theta) + slope(theta) * y."""

    def load_slope(self, theta):
        raise NotImplementedError

    def intercept(self, theta):
        raise NotImplementedError

    def edge_costs(self, theta, y):
        y = np.asarray(y, dtype=np.float64)
        return self.intercept(theta) + self.load_slope(theta) * y

    def potential(self, theta, y):
        y = np.asarray(y, dtype=np.float64)
        a = self.load_slope(theta)
        b = self.intercept(theta)
        return float(b @ y + 0.5 * (a * y) @ y)


@dataclass(frozen=True)
class FractionalCost(AffineCostModel):
    """d_i (1 + C y_i / (theta_i + 1)) with one theta coordinate per resource.

    Zero free-flow weights break strict monotonicity in load, so d is clamped
    below at 1e-6 * max(d) at construction; the clamp count is recorded.
    """

    d: np.ndarray
    c_scale: float
    clamped: int = field(default=0)

    def __post_init__(self):
        if self.c_scale <= 0:
            raise ValidationError("C must be positive")
        d = np.ascontiguousarray(self.d, dtype=np.float64)
        if d.ndim != 1 or len(d) == 0:
            raise ValidationError("d must be a nonempty vector")
        if np.any(d < 0) or np.any(d > 1 + 1e-12):
            raise ValidationError("free-flow weights must lie in [0, 1]")
        top = float(d.max())
        clamped = 0
        if top > 0:
            floor = 1e-6 * top
            clamped = int(np.sum(d < floor))
            if clamped:
                warnings.warn(
                    f"clamped {clamped} zero/near-zero free-flow weight(s) to {floor:g} "
                    "to preserve strict monotonicity"
                )
                d = np.maximum(d, floor)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "clamped", clamped)

    @property
    def n(self):
        return len(self.d)

    @property
    def k(self):
        return len(self.d)

    def load_slope(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if np.any(theta + 1.0 <= 1e-6):
            raise ValidationError("theta_i + 1 must stay positive")
        return self.d * self.c_scale / (theta + 1.0)

    def intercept(self, theta):
        return self.d


def validate_theta(theta, total=None, atol=THETA_SUM_ATOL):
    """Check the scaled-simplex constraints sum(theta) = total, theta >= 0."""
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValidationError("theta has non-finite entries")
    if np.any(theta < -LOAD_BAND):
        raise ValidationError("theta has negative entries")
    if total is not None and abs(float(theta.sum()) - total) > atol:
        raise ValidationError(f"theta sums to {theta.sum()}, expected {total}")
    return theta


def barycenter(k, total=None):
    """Simplex center; the default leader start (all-ones when total = k)."""
    if total is None:
        total = float(k)
    return np.full(k, total / k)


def check_load(y, atol=LOAD_BAND):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < -atol) or np.any(y > 1.0 + atol):
        raise ValidationError("load vector leaves the [0,1] band")
    return y


def edge_costs(model, theta, y):
    """Per-resource costs; this vector is the load-gradient of the potential."""
    return model.edge_costs(theta, y)


def potential(model, theta, y):
    """Separable congestion potential whose minimizer over the load polytope
    is the equilibrium load."""
    return model.potential(theta, y)


def social_cost(model, theta, y):
    """Leader objective: total cost experienced by the population."""
    return model.social_cost(theta, y)
