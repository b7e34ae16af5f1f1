"""Smooth maps between spheres, their jets, and pullback tensor data."""

from .maps import (
    ComposedMap,
    ConstantMap,
    HopfMap,
    IdentityMap,
    JetBatch,
    LinearMap,
    MapJet,
    PolynomialMap,
    SphereMap,
    SuspensionMap,
    eval_jet,
    isotropy_check,
    parse_map,
    random_rotation,
    topological_degree,
)
from .pullbacks import PullbackBatch, PullbackPointData, map_pullbacks, pullback_batch, pullback_data
from .targets import TargetGeometry, kahler_surface, unit_sphere

__all__ = [
    "ComposedMap",
    "ConstantMap",
    "HopfMap",
    "IdentityMap",
    "JetBatch",
    "LinearMap",
    "MapJet",
    "PolynomialMap",
    "SphereMap",
    "SuspensionMap",
    "TargetGeometry",
    "PullbackBatch",
    "PullbackPointData",
    "eval_jet",
    "isotropy_check",
    "kahler_surface",
    "map_pullbacks",
    "parse_map",
    "pullback_batch",
    "pullback_data",
    "random_rotation",
    "topological_degree",
    "unit_sphere",
]
