"""Reduced-order simulation and trial analysis for tendon-driven segmented tails."""

from .analysis import (
    GroupStats,
    PlanarPose,
    collapse_to_plane,
    compare_groups,
    normalized_rms_error,
    one_way_anova,
    pairwise_std,
    tip_metrics,
    tukey_hsd,
)
from .elements import BarElement, SpringElement, element_stiffness
from .geometry import (
    REFERENCE_MORPHOLOGIES,
    JointProfile,
    MorphologySpec,
    TailModel,
    build_tail,
    moment_arm,
    reference_tail,
    single_joint_spec,
)
from .oracle import minimize_total_energy, total_potential
from .solver import LoadCase, SolveResult, assemble_global, euler_solve, linear_solve
from .tail import (
    CalibrationFit,
    calibrate_linear,
    calibrate_spring_stiffness,
    load_calibration_samples,
    predict_pose_uniform,
    single_joint_displacement,
    tendon_path_length,
    uniform_bend_angle,
)

__all__ = [
    "REFERENCE_MORPHOLOGIES",
    "BarElement",
    "CalibrationFit",
    "GroupStats",
    "JointProfile",
    "LoadCase",
    "MorphologySpec",
    "PlanarPose",
    "SolveResult",
    "SpringElement",
    "TailModel",
    "assemble_global",
    "build_tail",
    "calibrate_linear",
    "calibrate_spring_stiffness",
    "collapse_to_plane",
    "compare_groups",
    "element_stiffness",
    "euler_solve",
    "linear_solve",
    "load_calibration_samples",
    "minimize_total_energy",
    "moment_arm",
    "normalized_rms_error",
    "one_way_anova",
    "pairwise_std",
    "reference_tail",
    "predict_pose_uniform",
    "single_joint_displacement",
    "single_joint_spec",
    "tendon_path_length",
    "tip_metrics",
    "total_potential",
    "tukey_hsd",
    "uniform_bend_angle",
]
