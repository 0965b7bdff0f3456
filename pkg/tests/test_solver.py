import math
from dataclasses import dataclass

import numpy as np
import pytest

from tailsim.elements import BarElement, element_stiffness
from tailsim.geometry import JointProfile, build_tail, reference_tail, single_joint_spec
from tailsim.solver import (
    AssemblyError,
    LoadCase,
    RankDeficiencyError,
    apply_constraints,
    assemble_global,
    bend_angles,
    commanded_force,
    decompose_tendon_load,
    euler_solve,
    internal_force,
    linear_solve,
    load_jacobian,
    planar_load,
    planar_rest,
    tension_multiplier,
    tract_direction,
)
from tailsim.tail import CalibrationFit

P = JointProfile()


@dataclass
class BarsOnly:
    nodes: np.ndarray
    bars: tuple

    def all_bars(self):
        return self.bars

    def all_springs(self):
        return ()


@pytest.fixture(scope="module")
def joint():
    return build_tail(single_joint_spec())


class TestAssembly:
    def test_single_bar(self):
        nodes = np.array([[0, 0, 0], [3.0, 4.0, 0]])
        bar = BarElement((0, 1), 2.0, 5.0)
        K = assemble_global(BarsOnly(nodes, (bar,))).K
        assert np.array_equal(K, element_stiffness(bar, nodes).matrix)

    def test_shared_node_block_is_sum(self):
        nodes = np.array([[0, 0, 0], [5.0, 0, 0], [5.0, 7.0, 0]])
        b1, b2 = BarElement((0, 1), 2.0, 5.0), BarElement((1, 2), 3.0, 7.0)
        K = assemble_global(BarsOnly(nodes, (b1, b2))).K
        k1 = element_stiffness(b1, nodes[[0, 1]]).matrix
        k2 = element_stiffness(b2, nodes[[1, 2]]).matrix
        assert np.allclose(K[3:6, 3:6], k1[3:, 3:] + k2[:3, :3], rtol=0, atol=1e-12)

    def test_out_of_range(self):
        nodes = np.array([[0, 0, 0], [5.0, 0, 0]])
        with pytest.raises(AssemblyError):
            assemble_global(BarsOnly(nodes, (BarElement((0, 4), 1.0, 5.0),)))

    def test_symmetric(self):
        K = assemble_global(build_tail(reference_tail("SSL"))).K
        assert np.abs(K - K.T).max() <= 1e-8 * np.abs(K).max()


class TestConstraints:
    def test_single_joint_free_dofs(self, joint):
        red = apply_constraints(assemble_global(joint), joint.fixed_node_ids)
        assert len(red.free_dofs) == 6
        assert np.all(np.linalg.eigvalsh(red.K) > 0)

    def test_planar_reduced_positive_definite(self):
        m = build_tail(reference_tail("LSS"))
        sysm = assemble_global(m, rest=planar_rest(m))
        red = apply_constraints(sysm, m.fixed_node_ids)
        assert np.all(np.linalg.eigvalsh(red.K) > 0)

    def test_unanchored(self, joint):
        with pytest.raises(RankDeficiencyError):
            apply_constraints(assemble_global(joint), [])

    def test_mechanism_named(self):
        nodes = np.array([[0, 0, 0], [5.0, 0, 0]])
        sysm = assemble_global(BarsOnly(nodes, (BarElement((0, 1), 1.0, 5.0),)))
        with pytest.raises(RankDeficiencyError, match="node 1"):
            apply_constraints(sysm, [0])

    def test_all_fixed(self, joint):
        with pytest.raises(ValueError, match="every DoF"):
            apply_constraints(assemble_global(joint), range(joint.n_nodes))


class TestLoads:
    def test_decompose(self):
        assert decompose_tendon_load(1.0, P, 0.0) == pytest.approx((1.0, 2 * 12.812 / 12), abs=1e-3)
        assert decompose_tendon_load(0.0, P, 0.3) == (0.0, 0.0)
        assert decompose_tendon_load(1.0, P, math.pi / 2)[1] == pytest.approx(0.769, abs=1e-3)
        with pytest.raises(ValueError):
            decompose_tendon_load(-1.0, P, 0.0)

    def test_two_tract_multipliers(self, joint):
        assert tension_multiplier(joint, (0,)) == (1.0, 1.0)
        ax, mo = tension_multiplier(joint, (0, 1))
        assert ax == 2.0
        assert mo == pytest.approx(math.sqrt(2.0))
        assert tract_direction(joint, (0, 1)) == pytest.approx([0.0, 1.0, 0.0], abs=1e-15)

    @pytest.mark.parametrize("tracts", [(0, 2), (1, 3), (0, 1, 2), (4,)])
    def test_bad_tracts(self, joint, tracts):
        with pytest.raises(ValueError):
            tract_direction(joint, tracts)

    def test_load_case_validation(self):
        with pytest.raises(ValueError):
            LoadCase()
        with pytest.raises(ValueError):
            LoadCase(force=1.0, displacement=1.0)
        with pytest.raises(ValueError):
            LoadCase(force=-1.0)
        with pytest.raises(ValueError):
            LoadCase(force=1.0, steps=0)
        with pytest.raises(ValueError):
            LoadCase(force=1.0, tracts=(0, 2))

    def test_displacement_needs_fit(self, joint):
        with pytest.raises(ValueError, match="calibration"):
            euler_solve(joint, LoadCase(displacement=3.0))

    def test_displacement_shared_by_joints(self):
        fit = CalibrationFit(0.25)
        m = build_tail(reference_tail("SSL"))
        assert commanded_force(m, LoadCase(displacement=12.0), fit) == pytest.approx(0.25 * 4.0)

    def test_multi_joint_loads_are_self_balanced(self):
        m = build_tail(reference_tail("SLS"))
        f = planar_load(m, planar_rest(m), 1.0).reshape(-1, 2)
        assert np.abs(f.sum(axis=0)).max() < 1e-12


class TestEuler:
    def test_zero_force_exact(self, joint):
        res = euler_solve(joint, LoadCase(force=0.0, steps=10))
        assert np.array_equal(res.final_pose, joint.nodes)
        assert res.tendon_displacement == 0.0

    def test_history_shapes(self, joint):
        res = euler_solve(joint, LoadCase(force=0.3, steps=25))
        assert len(res.node_history) == 26
        assert len(res.force_history) == 26
        assert len(res.gamma_history) == 26
        assert np.array_equal(res.final_pose, res.node_history[-1])
        assert res.force_history[-1] == pytest.approx(0.3)

    def test_small_force_matches_linear(self, joint):
        case = LoadCase(force=0.005, steps=200, record_history=False)
        tip = joint.tip_node
        du_nl = euler_solve(joint, case).final_pose[tip] - joint.nodes[tip]
        du_lin = linear_solve(joint, case)[tip] - joint.nodes[tip]
        assert np.linalg.norm(du_nl - du_lin) <= 1e-3 * np.linalg.norm(du_lin)

    def test_anchor_force_gives_three_mm(self, joint):
        res = euler_solve(joint, LoadCase(force=0.8143, record_history=False))
        assert res.tendon_displacement == pytest.approx(3.0, rel=0.04)

    def test_mirror(self, joint):
        a = euler_solve(joint, LoadCase(tracts=(0,), force=1.2, record_history=False)).final_pose
        b = euler_solve(joint, LoadCase(tracts=(2,), force=1.2, record_history=False)).final_pose
        mirrored = b * [-1, -1, 1]
        assert np.abs(a - mirrored).max() <= 1e-9 * np.abs(a).max()

    def test_monotone_tip(self, joint):
        res = euler_solve(joint, LoadCase(force=2.5, steps=200))
        r = res.node_history[:, joint.tip_node] @ res.direction
        assert np.all(np.diff(r) >= 0)
        assert np.all(np.diff(res.tendon_history) >= 0)

    def test_step_refinement(self, joint):
        tip = joint.tip_node
        a = euler_solve(joint, LoadCase(force=2.5, steps=100, record_history=False)).final_pose[tip]
        b = euler_solve(joint, LoadCase(force=2.5, steps=200, record_history=False)).final_pose[tip]
        assert np.linalg.norm(a - b) < 0.005 * np.linalg.norm(b)

    def test_joint_angles_equal_in_tail(self):
        m = build_tail(reference_tail("SSL"))
        res = euler_solve(m, LoadCase(force=0.6, steps=100, record_history=False))
        g = res.final_gamma
        assert np.all(g > 0)
        assert g == pytest.approx(np.full(3, g.mean()), rel=0.01)

    def test_bend_angles_sign(self, joint):
        res = euler_solve(joint, LoadCase(force=0.5, steps=50, record_history=False))
        x = np.column_stack([res.final_pose @ res.direction, res.final_pose[:, 2]])
        assert bend_angles(joint, x)[0] > 0

    def test_body_force_axial_only(self, joint):
        res = euler_solve(joint, LoadCase(force=0.0, steps=20, body_force=(0.0, 0.0, -0.1)))
        tip = res.final_pose[joint.tip_node]
        assert tip[2] < joint.nodes[joint.tip_node, 2]
        assert np.hypot(tip[0], tip[1]) < 1e-12

    def test_work_conjugate_displacement_close_to_bend_excursion(self, joint):
        res = euler_solve(joint, LoadCase(force=1.0, record_history=False))
        # the axial shortening of the joint adds a little travel on top
        assert res.tendon_displacement > res.excursion_from_bends
        assert res.tendon_displacement == pytest.approx(res.excursion_from_bends, rel=0.1)

    def test_without_drift_correction_still_close(self, joint):
        tip = joint.tip_node
        a = euler_solve(joint, LoadCase(force=1.0, record_history=False)).final_pose[tip]
        b = euler_solve(joint, LoadCase(force=1.0, record_history=False), correct_drift=False).final_pose[tip]
        assert np.linalg.norm(a - b) < 0.05 * np.linalg.norm(a - joint.nodes[tip])

    def test_equilibrated_residual(self):
        m = build_tail(reference_tail("SLS"))
        res = euler_solve(m, LoadCase(tracts=(1, 2), force=0.5, steps=50, record_history=False))
        rest = planar_rest(m)
        x = np.column_stack([res.final_pose @ res.direction, res.final_pose[:, 2]])
        f = np.column_stack([res.final_load @ res.direction, res.final_load[:, 2]]).ravel()
        r = (f - internal_force(m, (x - rest).ravel(), rest)).reshape(-1, 2)[2:]
        assert np.linalg.norm(r) <= 1e-6 * (1 + np.linalg.norm(f))

    def test_tail_result_independent_of_steps(self):
        m = build_tail(reference_tail("LSS"))
        tips = [
            euler_solve(m, LoadCase(tracts=(0, 1), force=0.5, steps=s, record_history=False)).final_pose[m.tip_node]
            for s in (50, 100)
        ]
        assert np.linalg.norm(tips[0] - tips[1]) < 1e-4

    def test_raw_increments_converge(self):
        m = build_tail(reference_tail("SSL"))
        case = lambda s: LoadCase(force=0.5, steps=s, record_history=False)
        ref = euler_solve(m, case(50)).final_pose[m.tip_node]
        errs = [
            np.linalg.norm(euler_solve(m, case(s), equilibrate=False).final_pose[m.tip_node] - ref) for s in (100, 200, 400)
        ]
        assert errs[0] > errs[1] > errs[2]


class TestLoadJacobian:
    def test_matches_difference_of_loads(self):
        m = build_tail(reference_tail("SSL"))
        rng = np.random.default_rng(0)
        x = planar_rest(m) + rng.normal(scale=0.5, size=(m.n_nodes, 2))
        J = load_jacobian(m, x)
        dx = rng.normal(scale=1e-4, size=x.shape)
        df = planar_load(m, x + dx, 1.0) - planar_load(m, x, 1.0)
        assert J @ dx.ravel() == pytest.approx(df, abs=1e-7)

    def test_single_joint_rest_rotation(self):
        # the pull follows the joint, so rotating the distal node turns the load
        m = build_tail(single_joint_spec())
        J = load_jacobian(m, planar_rest(m))
        assert np.abs(J).max() > 0
