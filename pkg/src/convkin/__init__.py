"""Discrete kinematic formulas for convex bodies and convex functions."""

from .functions import (
    EpiPolyhedral,
    MaxAffine,
    NotDeconvolvable,
    RadialProfile,
    add,
    ball_indicator,
    cone_function,
    conjugate,
    epi_scale,
    floor_body,
    indicator,
    inf_convolve,
    inf_deconvolve,
    point_indicator,
    project,
    rotate,
    support_fn,
)
from .geometry import (
    AtomicSphereMeasure,
    Polytope,
    Rotation,
    convex_hull,
    intrinsic_volume,
    kappa,
    minkowski_sum,
    mixed_area_measure,
    mixed_volume,
    polytopal_ball,
    polytopal_disk,
    sample_rotation,
    sample_rotations,
    surface_area_measure,
    volume,
)
from .monge_ampere import (
    AtomicMeasure,
    SmoothProfile,
    TestFunction,
    conj_ma,
    map_j,
    ma,
    mixed_map,
)
from .kinematics import VerificationReport, flag_coefficient, functional_intrinsic_volume

__all__ = [
    "EpiPolyhedral",
    "MaxAffine",
    "NotDeconvolvable",
    "RadialProfile",
    "add",
    "ball_indicator",
    "cone_function",
    "conjugate",
    "epi_scale",
    "floor_body",
    "indicator",
    "inf_convolve",
    "inf_deconvolve",
    "point_indicator",
    "project",
    "rotate",
    "support_fn",
    "AtomicSphereMeasure",
    "Polytope",
    "Rotation",
    "convex_hull",
    "intrinsic_volume",
    "kappa",
    "minkowski_sum",
    "mixed_area_measure",
    "mixed_volume",
    "polytopal_ball",
    "polytopal_disk",
    "sample_rotation",
    "sample_rotations",
    "surface_area_measure",
    "volume",
    "AtomicMeasure",
    "SmoothProfile",
    "TestFunction",
    "conj_ma",
    "map_j",
    "ma",
    "mixed_map",
    "VerificationReport",
    "flag_coefficient",
    "functional_intrinsic_volume",
]

__version__ = "0.1.0"
