import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from tailsim.geometry import (
    DEFAULT_AZIMUTHS,
    GeometryError,
    JointProfile,
    MorphologySpec,
    build_tail,
    cross_section_area,
    effective_axial_stiffness,
    moment_arm,
    reference_tail,
    polyline_length,
    radius_at,
    single_joint_spec,
    tendon_excursion,
)

P = JointProfile()


class TestJointProfile:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(h=0), dict(r2=0), dict(r1=4.0, r2=4.615), dict(E=-1), dict(k_theta=0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(GeometryError):
            JointProfile(**kwargs)

    def test_neck_continuity(self):
        assert radius_at(P, P.h / 2) == pytest.approx(P.r2, abs=1e-15)

    def test_slant(self):
        assert P.slant == pytest.approx(8.197, abs=1e-3)


class TestRadius:
    def test_endpoints_and_midpoints(self):
        assert radius_at(P, 0.0) == pytest.approx(10.2)
        assert radius_at(P, 6.0) == pytest.approx(4.615)
        assert radius_at(P, 3.0) == pytest.approx(7.4075)
        assert radius_at(P, 12.0) == pytest.approx(10.2)

    @pytest.mark.parametrize("y", [-1e-9, 12.0001])
    def test_domain(self, y):
        with pytest.raises(GeometryError):
            radius_at(P, y)

    @given(st.floats(0, 12))
    def test_bounds_and_symmetry(self, y):
        r = radius_at(P, y)
        assert P.r2 <= r <= P.r1
        assert r == pytest.approx(radius_at(P, 12.0 - y), abs=1e-12)

    def test_extremes_exact(self):
        ys = np.linspace(0, 12, 1201)
        r = np.array([radius_at(P, y) for y in ys])
        assert r.max() == P.r1
        assert r.min() == P.r2


class TestArea:
    def test_values(self):
        assert cross_section_area(P, 6.0) == pytest.approx(math.pi * 4.615**2, rel=1e-15)
        assert cross_section_area(P, 6.0) == pytest.approx(66.90, abs=0.02)
        assert cross_section_area(P, 0.0) == pytest.approx(326.85, abs=0.01)
        assert cross_section_area(P, 12.0) == cross_section_area(P, 0.0)

    def test_domain(self):
        with pytest.raises(GeometryError):
            cross_section_area(P, 13.0)


class TestMomentArm:
    def test_values(self):
        assert moment_arm(P, 0.0) == pytest.approx(12.812, abs=1e-3)
        assert moment_arm(P, math.pi / 2) == pytest.approx(4.615, abs=1e-12)
        assert moment_arm(P, math.pi / 3) == pytest.approx(8.713, abs=1e-3)

    def test_domain(self):
        with pytest.raises(GeometryError):
            moment_arm(P, -0.1)
        with pytest.raises(GeometryError):
            moment_arm(P, 1.6)

    @given(st.floats(0, math.pi / 2), st.floats(0, math.pi / 2))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert moment_arm(P, hi) <= moment_arm(P, lo)

    @given(st.floats(1e-6, math.pi / 2))
    def test_excursion_is_integral_of_arm(self, g):
        ref, _ = quad(lambda t: moment_arm(P, t), 0, g)
        assert tendon_excursion(P, g) == pytest.approx(ref, rel=1e-10, abs=1e-12)


class TestAxialStiffness:
    def test_quadrature_oracle(self):
        prof = JointProfile(E=1.0)
        compliance, _ = quad(lambda y: 1.0 / (math.pi * radius_at(prof, y) ** 2), 0, prof.h / 2)
        k = effective_axial_stiffness(prof)
        assert k == pytest.approx(1.0 / compliance, rel=1e-10)
        assert k == pytest.approx(24.65, abs=0.01)

    def test_uniform_limit(self):
        # r1 > r2 is required, so approach the uniform bar from above
        prof = JointProfile(r1=5.0 + 1e-9, r2=5.0, E=2.0)
        assert effective_axial_stiffness(prof) == pytest.approx(2.0 * math.pi * 25 / 6, rel=1e-8)

    def test_linear_in_E(self):
        assert effective_axial_stiffness(JointProfile(E=0.3)) == pytest.approx(
            effective_axial_stiffness(JointProfile(E=0.6)) / 2, rel=1e-15
        )


class TestMorphologySpec:
    def test_bad_bone_named(self):
        with pytest.raises(GeometryError, match=r"bone_lengths\[1\]"):
            MorphologySpec((18, -2, 60))

    def test_bone_shorter_than_endcaps(self):
        with pytest.raises(GeometryError, match="endcaps"):
            MorphologySpec((18, 10, 60))

    def test_azimuths(self):
        with pytest.raises(GeometryError, match="four"):
            MorphologySpec((18,), tract_azimuths=(0.0, 1.0, 2.0))
        with pytest.raises(GeometryError, match="coincide"):
            MorphologySpec((18,), tract_azimuths=(0.0, 1.0, 2.0, 2 * math.pi))

    def test_default_azimuths(self):
        assert np.degrees(DEFAULT_AZIMUTHS) == pytest.approx([45, 135, 225, 315])

    def test_reference_tails_150mm(self):
        for name in ("SSL", "SLS", "LSS"):
            spec = reference_tail(name)
            # stump + bones (endcaps included) + joints
            assert spec.total_length == pytest.approx(18 + 96 + 36)
            assert spec.total_length == 150.0

    def test_unknown_tail(self):
        with pytest.raises(GeometryError, match="unknown morphology"):
            reference_tail("SSS")


class TestBuildTail:
    def test_single_joint(self):
        m = build_tail(single_joint_spec())
        assert len(m.joint_nodes) == 1
        assert len(m.bars) == 2 and len(m.springs) == 1
        assert m.n_nodes == 1 + 3
        assert m.fixed_node_ids == {0, 1}

    def test_three_joints(self):
        m = build_tail(reference_tail("SSL"))
        assert len(m.springs) == 3
        assert len(m.bars) == 6
        assert m.n_nodes == 1 + 3 * 3

    def test_collinear_rest(self):
        m = build_tail(reference_tail("LSS"))
        assert np.all(m.nodes[:, :2] == 0)
        assert np.all(np.diff(m.nodes[:, 2]) > 0)

    def test_joint_spacing(self):
        m = build_tail(reference_tail("SLS"))
        for b, n, t in m.joint_nodes:
            assert m.nodes[n, 2] - m.nodes[b, 2] == pytest.approx(6.0)
            assert m.nodes[t, 2] - m.nodes[n, 2] == pytest.approx(6.0)
        assert m.total_length == pytest.approx(m.bone_spans[-1, 1])

    def test_tracts(self):
        m = build_tail(reference_tail("SSL"))
        a = m.spec.loop_radius
        assert a == pytest.approx(moment_arm(m.profile, 0.0))
        for az, pts in zip(m.spec.tract_azimuths, m.tracts):
            assert np.hypot(pts[:, 0], pts[:, 1]) == pytest.approx(np.full(len(pts), a))
            assert np.arctan2(pts[:, 1], pts[:, 0]) % (2 * np.pi) == pytest.approx(np.full(len(pts), az))
        # base loop plus two loops per moving bone
        assert len(m.tracts[0]) == 1 + 2 * 3

    def test_model_immutable(self):
        m = build_tail(single_joint_spec())
        with pytest.raises(ValueError):
            m.nodes[0, 0] = 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(12.0, 80.0), min_size=1, max_size=5), st.floats(0.5, 30.0))
    def test_counts_and_rest_length(self, bones, radius):
        spec = MorphologySpec(tuple(bones), tract_radius=radius)
        m = build_tail(spec)
        n = len(bones)
        assert m.n_nodes == 1 + 3 * n
        assert len(m.bars) == 2 * n and len(m.springs) == n
        # straight tract length equals the axial span between its end loops
        for pts in m.tracts:
            assert polyline_length(pts) == pytest.approx(pts[-1, 2] - pts[0, 2], rel=1e-12)
        assert m.total_length == pytest.approx(spec.base_offset + sum(bones) + n * spec.joint_profile.h)

    def test_rigid_factor_validation(self):
        with pytest.raises(GeometryError):
            build_tail(single_joint_spec(), rigid_factor=0.0)
