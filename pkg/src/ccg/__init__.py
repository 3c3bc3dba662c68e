"""Bilevel optimization of combinatorial congestion games.

Inner loop: Frank-Wolfe over the load polytope with exact or sampled
combinatorial oracles (shortest path, decision-diagram min-cost, best-of-m
sampling).  Outer loop: projected two-point zeroth-order descent of the
leader objective on a scaled simplex, never differentiating through the
equilibrium.
"""

from .congestion import FractionalCost
from .equilibrium import (
    FwResult,
    ShortestPathLmo,
    ZddExactLmo,
    ZddSubsampledLmo,
    fw_equilibrium,
    fw_gap,
    line_search,
    wardrop_residual,
)
from .leader import ZoConfig, gradient_mapping_norm, project_theta, two_point_estimate, zo_stackelberg
from .network import FamilySpec, Network, load_network, parse_tntp, shortest_path_lmo, symmetrize
from .zdd import (
    SamplingScheme,
    Zdd,
    build_family,
    count,
    count_by_length,
    enumerate_strategies,
    min_cost,
    optimizer_mass,
    sample,
    subsampled_lmo,
)

__version__ = "0.1.0"

__all__ = [
    "FamilySpec",
    "FractionalCost",
    "FwResult",
    "Network",
    "SamplingScheme",
    "ShortestPathLmo",
    "Zdd",
    "ZddExactLmo",
    "ZddSubsampledLmo",
    "ZoConfig",
    "build_family",
    "count",
    "count_by_length",
    "enumerate_strategies",
    "fw_equilibrium",
    "fw_gap",
    "gradient_mapping_norm",
    "line_search",
    "load_network",
    "min_cost",
    "optimizer_mass",
    "parse_tntp",
    "project_theta",
    "sample",
    "shortest_path_lmo",
    "subsampled_lmo",
    "symmetrize",
    "two_point_estimate",
    "wardrop_residual",
    "zo_stackelberg",
]
