"""Joint and tail geometry.

Units are millimetres, newtons, N*mm, radians and MPa throughout.

A tail is a fixed base stump followed by ``n`` (joint, bone) pairs. Each
hourglass joint is discretised into three collinear nodes (base, neck,
tip) joined by two half-joint bars and one rotational spring at the neck.
Bones are rigid; they are represented by stiff penalty elements that tie
the distal half of one joint to the proximal half of the next. Node 0 is
an anchor on the base plate which, together with the base node of the
first joint, clamps the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .elements import BarElement, SpringElement

DEFAULT_AZIMUTHS = tuple(math.radians(a) for a in (45.0, 135.0, 225.0, 315.0))
DEFAULT_RIGID_FACTOR = 1.0e3


class GeometryError(ValueError):
    """Raised for invalid geometric parameters."""


@dataclass(frozen=True)
class JointProfile:
    """Hourglass joint: length ``h``, end radius ``r1``, neck radius ``r2``.

    ``E`` is the axial modulus (MPa) and ``k_theta`` the bending spring
    stiffness (N*mm/rad).
    """

    h: float = 12.0
    r1: float = 10.2
    r2: float = 4.615
    E: float = 0.625
    k_theta: float = 50.248

    def __post_init__(self):
        if not self.h > 0:
            raise GeometryError(f"h must be positive, got {self.h}")
        if not self.r2 > 0:
            raise GeometryError(f"r2 must be positive, got {self.r2}")
        if not self.r1 > self.r2:
            raise GeometryError(f"r1 must exceed r2, got r1={self.r1}, r2={self.r2}")
        if not self.E > 0:
            raise GeometryError(f"E must be positive, got {self.E}")
        if not self.k_theta > 0:
            raise GeometryError(f"k_theta must be positive, got {self.k_theta}")

    @property
    def slant(self) -> float:
        """Length of the cone generator from the neck rim to the end rim."""
        return math.hypot(self.r1 - self.r2, self.h / 2)

    def with_k_theta(self, k_theta: float) -> "JointProfile":
        return JointProfile(self.h, self.r1, self.r2, self.E, k_theta)


def radius_at(profile: JointProfile, y: float) -> float:
    """Radius of the hourglass at axial position ``y`` in ``[0, h]``."""
    h, r1, r2 = profile.h, profile.r1, profile.r2
    if not 0.0 <= y <= h:
        raise GeometryError(f"y={y} outside [0, {h}]")
    half = h / 2
    if y <= half:
        return (r2 - r1) / half * (y - half) + r2
    return (r1 - r2) / half * (y - half) + r2


def cross_section_area(profile: JointProfile, y: float) -> float:
    return math.pi * radius_at(profile, y) ** 2


def moment_arm(profile: JointProfile, gamma: float) -> float:
    """Tendon moment arm about the joint at bend angle ``gamma``.

    Decreases from ``r2 + slant`` when straight to ``r2`` at a right angle.
    """
    if not -1e-12 <= gamma <= math.pi / 2 + 1e-12:
        raise GeometryError(f"gamma={gamma} outside [0, pi/2]")
    return profile.r2 + profile.slant * math.cos(gamma)


def tendon_excursion(profile: JointProfile, gamma: float) -> float:
    """Tendon travel needed to bend one joint from straight to ``gamma``.

    Integral of the moment arm over the bend, i.e. the displacement that
    is work-conjugate to tendon tension.
    """
    if not -1e-12 <= gamma <= math.pi / 2 + 1e-12:
        raise GeometryError(f"gamma={gamma} outside [0, pi/2]")
    return profile.r2 * gamma + profile.slant * math.sin(gamma)


def effective_axial_stiffness(profile: JointProfile) -> float:
    """Axial stiffness (N/mm) of one half of the joint.

    A linear frustum of radii r1 and r2 over length h/2 behaves as springs
    in series, which integrates to ``E*pi*r1*r2/(h/2)``.
    """
    return profile.E * math.pi * profile.r1 * profile.r2 / (profile.h / 2)


@dataclass(frozen=True)
class MorphologySpec:
    """Bone/joint layout of a tail.

    ``bone_lengths`` are the moving bones, proximal to distal, each
    including its two endcaps. Every bone is preceded by one joint. The
    fixed stump integrated with the base has length ``base_offset``.
    """

    bone_lengths: tuple[float, ...]
    joint_profile: JointProfile = field(default_factory=JointProfile)
    endcap_length: float = 6.0
    tract_radius: float | None = None
    tract_azimuths: tuple[float, ...] = DEFAULT_AZIMUTHS
    base_offset: float = 18.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bone_lengths", tuple(float(b) for b in self.bone_lengths))
        object.__setattr__(self, "tract_azimuths", tuple(float(a) for a in self.tract_azimuths))
        if len(self.bone_lengths) == 0:
            raise GeometryError("bone_lengths: at least one bone is required")
        for i, b in enumerate(self.bone_lengths):
            if not b > 0:
                raise GeometryError(f"bone_lengths[{i}] must be positive, got {b}")
        if not self.endcap_length > 0:
            raise GeometryError(f"endcap_length must be positive, got {self.endcap_length}")
        for i, b in enumerate(self.bone_lengths):
            if b < 2 * self.endcap_length:
                raise GeometryError(
                    f"bone_lengths[{i}]={b} shorter than its two endcaps ({2 * self.endcap_length})"
                )
        if not self.base_offset > 0:
            raise GeometryError(f"base_offset must be positive, got {self.base_offset}")
        if self.tract_radius is not None and not self.tract_radius > 0:
            raise GeometryError(f"tract_radius must be positive, got {self.tract_radius}")
        az = self.tract_azimuths
        if len(az) != 4:
            raise GeometryError(f"tract_azimuths: exactly four required, got {len(az)}")
        for i in range(4):
            for j in range(i + 1, 4):
                d = (az[i] - az[j]) % (2 * math.pi)
                if min(d, 2 * math.pi - d) < 1e-9:
                    raise GeometryError(f"tract_azimuths[{i}] and [{j}] coincide")

    @property
    def n_joints(self) -> int:
        return len(self.bone_lengths)

    @property
    def loop_radius(self) -> float:
        """Radial offset of the tendon loops.

        Defaults to the straight-joint moment arm so that the tendon lever
        seen by the joint model and by the loop geometry agree.
        """
        if self.tract_radius is not None:
            return self.tract_radius
        return moment_arm(self.joint_profile, 0.0)

    @property
    def total_length(self) -> float:
        return self.base_offset + sum(self.bone_lengths) + self.n_joints * self.joint_profile.h


@dataclass(frozen=True)
class TailModel:
    """Discretised tail in its rest configuration (tail axis = +z)."""

    spec: MorphologySpec
    nodes: np.ndarray
    bars: tuple[BarElement, ...]
    springs: tuple[SpringElement, ...]
    rigid_bars: tuple[BarElement, ...]
    rigid_springs: tuple[SpringElement, ...]
    fixed_node_ids: frozenset[int]
    joint_nodes: tuple[tuple[int, int, int], ...]
    necks: np.ndarray
    bone_spans: np.ndarray
    tracts: tuple[np.ndarray, ...]
    loop_bones: np.ndarray

    @property
    def profile(self) -> JointProfile:
        return self.spec.joint_profile

    @property
    def n_joints(self) -> int:
        return len(self.joint_nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def total_length(self) -> float:
        return self.spec.total_length

    @property
    def axis(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    @property
    def tip_node(self) -> int:
        return self.joint_nodes[-1][2]

    def all_bars(self) -> tuple[BarElement, ...]:
        return self.bars + self.rigid_bars

    def all_springs(self) -> tuple[SpringElement, ...]:
        return self.springs + self.rigid_springs

    def with_k_theta(self, k_theta: float) -> "TailModel":
        spec = self.spec
        new = MorphologySpec(
            bone_lengths=spec.bone_lengths,
            joint_profile=spec.joint_profile.with_k_theta(k_theta),
            endcap_length=spec.endcap_length,
            tract_radius=spec.tract_radius,
            tract_azimuths=spec.tract_azimuths,
            base_offset=spec.base_offset,
            name=spec.name,
        )
        return build_tail(new, rigid_factor=self._rigid_factor())

    def _rigid_factor(self) -> float:
        if self.rigid_springs:
            return self.rigid_springs[0].k_theta / self.profile.k_theta
        return DEFAULT_RIGID_FACTOR


def _on_axis(z: float) -> np.ndarray:
    return np.array([0.0, 0.0, z])


def build_tail(spec: MorphologySpec, rigid_factor: float = DEFAULT_RIGID_FACTOR) -> TailModel:
    """Discretise a morphology into nodes, elements and tendon loops."""
    if not rigid_factor > 0:
        raise GeometryError(f"rigid_factor must be positive, got {rigid_factor}")
    prof = spec.joint_profile
    h = prof.h
    k_ax = effective_axial_stiffness(prof)
    k_rigid_ax = rigid_factor * k_ax
    k_rigid_rot = rigid_factor * prof.k_theta

    nodes = [_on_axis(0.0)]
    joint_nodes = []
    bars, springs, rigid_bars, rigid_springs = [], [], [], []
    necks = []
    spans = []
    z = spec.base_offset
    for i, bone in enumerate(spec.bone_lengths):
        b = len(nodes)
        nodes += [_on_axis(z), _on_axis(z + h / 2), _on_axis(z + h)]
        joint_nodes.append((b, b + 1, b + 2))
        necks.append(z + h / 2)
        bars.append(BarElement((b, b + 1), k_ax, h / 2))
        bars.append(BarElement((b + 1, b + 2), k_ax, h / 2))
        springs.append(SpringElement((b, b + 1, b + 2), prof.k_theta, math.pi))
        # clamp the proximal half to whatever precedes it
        prev = b - 1
        L = z - nodes[prev][2]
        rigid_bars.append(BarElement((prev, b), k_rigid_ax * (h / 2) / L, L))
        rigid_springs.append(SpringElement((prev, b, b + 1), k_rigid_rot, math.pi))
        if i > 0:
            rigid_springs.append(SpringElement((prev - 1, prev, b), k_rigid_rot, math.pi))
        spans.append((z + h, z + h + bone))
        z += h + bone

    a = spec.loop_radius
    e = spec.endcap_length
    loop_z = [spec.base_offset - e / 2]
    loop_bones = [0]
    for k, (z0, z1) in enumerate(spans, start=1):
        loop_z += [z0 + e / 2, z1 - e / 2]
        loop_bones += [k, k]
    tracts = []
    for az in spec.tract_azimuths:
        pts = np.array([[a * math.cos(az), a * math.sin(az), zz] for zz in loop_z])
        pts.flags.writeable = False
        tracts.append(pts)

    node_arr = np.array(nodes)
    node_arr.flags.writeable = False
    return TailModel(
        spec=spec,
        nodes=node_arr,
        bars=tuple(bars),
        springs=tuple(springs),
        rigid_bars=tuple(rigid_bars),
        rigid_springs=tuple(rigid_springs),
        fixed_node_ids=frozenset({0, 1}),
        joint_nodes=tuple(joint_nodes),
        necks=np.array(necks),
        bone_spans=np.array(spans),
        tracts=tuple(tracts),
        loop_bones=np.array(loop_bones),
    )


def single_joint_spec(profile: JointProfile | None = None, bone_length: float = 18.0) -> MorphologySpec:
    """The isolated bone-endcap-joint-endcap specimen used for calibration."""
    return MorphologySpec(
        bone_lengths=(bone_length,),
        joint_profile=profile if profile is not None else JointProfile(),
        name="single-joint",
    )


REFERENCE_MORPHOLOGIES: dict[str, tuple[float, ...]] = {
    "SSL": (18.0, 18.0, 60.0),
    "SLS": (18.0, 60.0, 18.0),
    "LSS": (60.0, 18.0, 18.0),
}


def reference_tail(name: str, profile: JointProfile | None = None) -> MorphologySpec:
    """One of the three 150 mm tails: SSL (crescendo), SLS, LSS (decrescendo)."""
    try:
        bones = REFERENCE_MORPHOLOGIES[name]
    except KeyError:
        raise GeometryError(f"unknown morphology {name!r}; expected one of {sorted(REFERENCE_MORPHOLOGIES)}")
    return MorphologySpec(
        bone_lengths=bones,
        joint_profile=profile if profile is not None else JointProfile(),
        name=name,
    )


def polyline_length(points: Sequence[Sequence[float]]) -> float:
    pts = np.asarray(points, dtype=float)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
