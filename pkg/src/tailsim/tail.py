"""Multi-joint kinematics, tendon geometry and calibration."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .geometry import JointProfile, TailModel, build_tail, single_joint_spec
from .solver import LoadCase, euler_solve, tract_direction

MAX_UNIFORM_BEND = math.pi / 3


class CalibrationError(ValueError):
    pass


class SaturationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationFit:
    """Linear tendon force-displacement relation ``F = slope*d + intercept``."""

    slope: float
    intercept: float = 0.0
    r_squared: float = 1.0

    def __post_init__(self):
        if not self.slope > 0:
            raise CalibrationError(f"calibration slope must be positive, got {self.slope}")
        if not 0.0 <= self.r_squared <= 1.0:
            raise CalibrationError(f"r_squared must lie in [0, 1], got {self.r_squared}")

    def force(self, d: float) -> float:
        return force_from_displacement(self, d)


# 0.8143 N at 3 mm, through the origin
ANCHOR_FIT = CalibrationFit(slope=0.8143 / 3.0, intercept=0.0, r_squared=0.994)

FIXTURE_PATH = Path(__file__).parent / "data" / "joint_pull_calibration.csv"


def force_from_displacement(fit: CalibrationFit, d):
    """Tendon force for displacement ``d`` (scalar or array, mm)."""
    if np.any(np.asarray(d) < 0):
        raise ValueError(f"tendon displacement must be non-negative, got {d}")
    return fit.slope * d + fit.intercept


def calibrate_linear(samples: Iterable[Sequence[float]], through_origin: bool = True) -> CalibrationFit:
    """Least-squares line through ``(displacement, force)`` samples.

    ``r_squared`` is the centred coefficient of determination in both modes.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise CalibrationError("samples must be (displacement, force) pairs")
    d, F = data[:, 0], data[:, 1]
    if len(np.unique(d)) < 2:
        raise CalibrationError("need at least two distinct displacements")
    if through_origin:
        slope = float(d @ F / (d @ d))
        intercept = 0.0
    else:
        slope, intercept = (float(v) for v in np.polyfit(d, F, 1))
    resid = F - (slope * d + intercept)
    ss_tot = float(np.sum((F - F.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 0.0
    return CalibrationFit(slope=slope, intercept=intercept, r_squared=min(max(r2, 0.0), 1.0))


def load_calibration_samples(path: str | Path = FIXTURE_PATH) -> np.ndarray:
    """Read a ``displacement_mm,force_N`` file with one header line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["displacement_mm", "force_N"]:
            raise CalibrationError(f"{path}: expected header displacement_mm,force_N, got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    return np.array(rows)


def single_joint_displacement(
    profile: JointProfile, k_theta: float, force: float, steps: int = 200
) -> float:
    """Tendon displacement of the isolated joint specimen under ``force``."""
    model = build_tail(single_joint_spec(profile.with_k_theta(k_theta)))
    res = euler_solve(model, LoadCase(force=force, steps=steps, record_history=False))
    return res.tendon_displacement


def calibrate_spring_stiffness(
    fit: CalibrationFit,
    profile: JointProfile,
    d_ref: float = 3.0,
    steps: int = 200,
    rtol: float = 1e-6,
) -> float:
    """Bending stiffness for which the simulated specimen matches ``fit`` at ``d_ref``."""
    force = fit.force(d_ref)
    if force <= 0:
        raise CalibrationError(f"fit gives non-positive force {force} at {d_ref} mm")

    def g(k):
        return single_joint_displacement(profile, k, force, steps) - d_ref

    # displacement is close to inversely proportional to k
    k0 = profile.k_theta
    k1 = k0 * (g(k0) + d_ref) / d_ref
    lo, hi = k1 / 1.03, k1 * 1.03
    g_lo, g_hi = g(lo), g(hi)
    tries = 0
    while g_lo * g_hi > 0:
        tries += 1
        if tries > 20:
            raise CalibrationError(f"no sign change of the displacement error in k_theta in [{lo:.4g}, {hi:.4g}]")
        if g_lo < 0:
            lo /= 2
            g_lo = g(lo)
        else:
            hi *= 2
            g_hi = g(hi)
    return brentq(g, lo, hi, xtol=rtol * k1, rtol=rtol)


# --- kinematics -----------------------------------------------------------


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    k = axis / np.linalg.norm(axis)
    Kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * Kx + (1 - math.cos(angle)) * (Kx @ Kx)


@dataclass(frozen=True)
class TailPose:
    """Rigid placement of every bone; bone 0 is the fixed stump.

    A rest point ``x`` on bone ``i`` maps to ``rotations[i] @ x + offsets[i]``.
    """

    model: TailModel
    rotations: np.ndarray  # (n+1, 3, 3)
    offsets: np.ndarray  # (n+1, 3)
    joint_angles: np.ndarray  # (n,)
    direction: np.ndarray

    def transform(self, bone: int, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotations[bone].T + self.offsets[bone]

    def bone_ends(self) -> np.ndarray:
        """(n, 2, 3) proximal and distal ends of every moving bone."""
        out = []
        for i, (z0, z1) in enumerate(self.model.bone_spans, start=1):
            out.append(self.transform(i, [[0, 0, z0], [0, 0, z1]]))
        return np.array(out)

    @property
    def centroids(self) -> np.ndarray:
        return self.bone_ends().mean(axis=1)

    @property
    def tip(self) -> np.ndarray:
        return self.bone_ends()[-1, 1]

    def tracked_points(self) -> np.ndarray:
        """Distal end of every moving bone, i.e. joints 2..n and the tail tip."""
        return self.bone_ends()[:, 1]

    def neck_points(self) -> np.ndarray:
        necks = [[0, 0, z] for z in self.model.necks]
        return np.array([self.transform(j, necks[j]) for j in range(self.model.n_joints)])


def pose_from_angles(model: TailModel, angles: Sequence[float], direction) -> TailPose:
    """Forward kinematics: joint ``j`` rotates everything distal about its neck."""
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (model.n_joints,):
        raise ValueError(f"expected {model.n_joints} joint angles, got shape {angles.shape}")
    b = np.asarray(direction, dtype=float)
    b = b / np.linalg.norm(b)
    axis = np.cross([0.0, 0.0, 1.0], b)
    A = [np.eye(3)]
    c = [np.zeros(3)]
    for j, th in enumerate(angles):
        R = _rotation(axis, th)
        n = np.array([0.0, 0.0, model.necks[j]])
        A.append(A[-1] @ R)
        c.append(A[-2] @ (n - R @ n) + c[-1])
    return TailPose(model, np.array(A), np.array(c), angles.copy(), b)


def tendon_path_length(model: TailModel, pose: TailPose, tract: int) -> float:
    """Length of the straight segments through one tract's loops in ``pose``."""
    if tract not in range(4):
        raise ValueError(f"tract id {tract} not in 0..3")
    loops = model.tracts[tract]
    pts = np.array([pose.transform(int(bn), p) for bn, p in zip(model.loop_bones, loops)])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def rest_pose(model: TailModel, direction=(1.0, 0.0, 0.0)) -> TailPose:
    return pose_from_angles(model, np.zeros(model.n_joints), direction)


def _shortening(model: TailModel, tracts: Sequence[int], theta: float) -> float:
    direction = tract_direction(model, tracts)
    t = tracts[0]
    L0 = tendon_path_length(model, rest_pose(model, direction), t)
    pose = pose_from_angles(model, np.full(model.n_joints, theta), direction)
    return L0 - tendon_path_length(model, pose, t)


def uniform_bend_angle(model: TailModel, tracts: Sequence[int], d: float) -> float:
    """Per-joint bend that shortens the pulled tendon(s) by ``d``, all joints equal.

    For identical joints with identical loop spacing this is also the
    equal-shortening-per-joint solution.
    """
    tracts = tuple(tracts)
    if d < 0:
        raise ValueError(f"tendon displacement must be non-negative, got {d}")
    if d == 0:
        return 0.0
    d_max = _shortening(model, tracts, MAX_UNIFORM_BEND)
    if d >= d_max:
        raise SaturationError(
            f"displacement {d} mm exceeds the achievable shortening {d_max:.4f} mm "
            f"at {math.degrees(MAX_UNIFORM_BEND):.0f} deg per joint"
        )
    return brentq(lambda th: _shortening(model, tracts, th) - d, 0.0, MAX_UNIFORM_BEND, xtol=1e-14, rtol=1e-14)


def predict_pose_uniform(model: TailModel, theta: float, tracts: Sequence[int]) -> TailPose:
    """Pose with every joint bent by ``theta`` towards the pulled tract(s)."""
    if not abs(theta) < MAX_UNIFORM_BEND + 1e-12:
        raise ValueError(f"|theta|={abs(theta)} must stay below pi/3")
    return pose_from_angles(model, np.full(model.n_joints, theta), tract_direction(model, tracts))


def pose_from_solve(model: TailModel, result) -> TailPose:
    """Rigid-bone pose carrying the joint bends found by an Euler solve."""
    return pose_from_angles(model, result.final_gamma, result.direction)
