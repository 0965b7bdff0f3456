"""Acceptance criteria, each checked at its stated tolerance and runtime."""

import time

import numpy as np
import pytest

from tailsim.analysis import collapse_to_plane, one_way_anova, tip_metrics
from tailsim.cli import main
from tailsim.elements import BarElement, SpringElement, element_stiffness
from tailsim.geometry import JointProfile, build_tail, reference_tail, single_joint_spec
from tailsim.oracle import minimize_total_energy
from tailsim.solver import LoadCase, euler_solve
from tailsim.tail import (
    calibrate_linear,
    calibrate_spring_stiffness,
    load_calibration_samples,
    predict_pose_uniform,
    single_joint_displacement,
    uniform_bend_angle,
)

TAILS = ("SSL", "SLS", "LSS")


@pytest.fixture(scope="module")
def fixture_fit():
    return calibrate_linear(load_calibration_samples())


def truss_matrix(k, e):
    block = k * np.outer(e, e)
    return np.block([[block, -block], [-block, block]])


def test_element_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bar_err = 0.0
    for _ in range(20):
        e = rng.normal(size=3)
        e /= np.linalg.norm(e)
        L, k = rng.uniform(2, 40), rng.uniform(0.1, 100)
        x0 = rng.normal(size=3) * 20
        K = element_stiffness(BarElement((0, 1), k, L), np.array([x0, x0 + L * e])).matrix
        ref = truss_matrix(k, e)
        bar_err = max(bar_err, np.linalg.norm(K - ref) / np.linalg.norm(ref))
    spring_err = 0.0
    for _ in range(20):
        rest = rng.normal(size=(3, 3)) * 10
        K = element_stiffness(SpringElement((0, 1, 2), rng.uniform(1, 100), 1.0), rest).matrix
        for c in range(3):
            t = np.zeros(9)
            t[c::3] = 1.0
            spring_err = max(spring_err, np.linalg.norm(K @ t) / np.linalg.norm(K))
    dt = time.perf_counter() - t0
    ok = bar_err <= 1e-5 and spring_err <= 1e-6 and dt < 1.0
    assert report(1, ok, f"bar rel err {bar_err:.2e}, spring translation {spring_err:.2e}, {dt:.2f} s")


def test_linearity(report, fixture_fit):
    t0 = time.perf_counter()
    prof = JointProfile()
    k = calibrate_spring_stiffness(fixture_fit, prof)
    model = build_tail(single_joint_spec(prof.with_k_theta(k)))
    res = euler_solve(model, LoadCase(force=1.1 * fixture_fit.force(9.0), steps=200))
    d, F = res.tendon_history, res.force_history
    keep = d <= 9.0
    r2 = calibrate_linear(np.column_stack([d[keep], F[keep]])).r_squared
    dt = time.perf_counter() - t0
    ok = r2 >= 0.99 and dt < 10.0 and d[keep][-1] > 8.9
    assert report(2, ok, f"R^2 {r2:.4f} over 0-{d[keep][-1]:.2f} mm, {dt:.2f} s")


def test_calibration_anchor(report, fixture_fit):
    t0 = time.perf_counter()
    prof = JointProfile()
    k = calibrate_spring_stiffness(fixture_fit, prof)
    d = single_joint_displacement(prof, k, 0.8143)
    dt = time.perf_counter() - t0
    rel = abs(d - 3.0) / 3.0
    ok = rel <= 0.04 and dt < 5.0
    assert report(3, ok, f"k_theta {k:.3f} N*mm/rad, {d:.4f} mm at 0.8143 N ({100 * rel:.2f}%), {dt:.2f} s")


def test_solver_oracle_agreement(report):
    t0 = time.perf_counter()
    model = build_tail(single_joint_spec())
    gaps = []
    for F in np.linspace(0.1, 2.5, 10):
        res = euler_solve(model, LoadCase(force=float(F), record_history=False))
        eq = minimize_total_energy(model, res.final_load)
        gaps.append(np.abs(eq.positions - res.final_pose).max())
    dt = time.perf_counter() - t0
    ok = max(gaps) <= 0.01 * model.profile.h and dt < 60.0
    assert report(4, ok, f"max node gap {max(gaps):.2e} mm over 10 cases (limit 0.12), {dt:.2f} s")


def test_refinement(report, fixture_fit):
    # the four single tracts (and the four pairs) differ only by a rotation
    # about the tail axis, so one representative per kind covers all cases
    worst = 0.0
    for name in TAILS:
        model = build_tail(reference_tail(name))
        for tracts in ((0,), (0, 1)):
            for d in (12.0, 21.0):
                tips = []
                for steps in (200, 400):
                    case = LoadCase(tracts=tracts, displacement=d, steps=steps, record_history=False)
                    tips.append(euler_solve(model, case, fit=fixture_fit).final_pose[model.tip_node])
                moved = np.linalg.norm(tips[1] - model.nodes[model.tip_node])
                worst = max(worst, np.linalg.norm(tips[0] - tips[1]) / moved)
    ok = worst < 0.005
    assert report(5, ok, f"max tip change 200->400 steps {100 * worst:.2e}% of tip travel over 12 cases")


def test_morphology_ordering(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for d in (12.0, 21.0):
        m = {}
        for name in TAILS:
            model = build_tail(reference_tail(name))
            pose = predict_pose_uniform(model, uniform_bend_angle(model, (0,), d), (0,))
            m[name] = tip_metrics(collapse_to_plane(pose.tracked_points()))
        perp = {k: v[0] for k, v in m.items()}
        radial = {k: v[1] for k, v in m.items()}
        others = [t for t in TAILS if t != "SSL"]
        ok &= all(radial["SSL"] > radial[t] for t in others)
        ok &= all(perp["SSL"] < perp[t] for t in others)
        lines.append(f"{d:g} mm radial " + "/".join(f"{radial[t]:.1f}" for t in TAILS))
    dt = time.perf_counter() - t0
    ok &= dt < 1.0
    assert report(6, ok, "; ".join(lines) + f" (SSL/SLS/LSS), {dt:.2f} s")


def test_symmetry_suite(report):
    checks = {}
    for name in TAILS:
        model = build_tail(reference_tail(name))
        a = euler_solve(model, LoadCase(tracts=(1,), force=0.6, record_history=False)).final_pose
        b = euler_solve(model, LoadCase(tracts=(3,), force=0.6, record_history=False)).final_pose
        checks.setdefault("mirror", []).append(np.abs(a - b * [-1, -1, 1]).max() / np.abs(a).max())
        zero = euler_solve(model, LoadCase(force=0.0, steps=5)).final_pose
        checks.setdefault("zero", []).append(np.abs(zero - model.nodes).max())
        ends = predict_pose_uniform(model, 0.5, (0, 1)).bone_ends()
        lengths = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
        checks.setdefault("bones", []).append(np.abs(lengths - np.diff(model.bone_spans, axis=1).ravel()).max())
    mirror, zero, bones = (max(checks[k]) for k in ("mirror", "zero", "bones"))
    # rotations in floating point cannot be bit exact; 1e-12 mm is round-off level
    ok = mirror <= 1e-9 and zero == 0.0 and bones <= 1e-12
    assert report(7, ok, f"mirror rel {mirror:.1e}, zero-load drift {zero:g}, bone length error {bones:.1e} mm")


def test_statistics_oracle(report):
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 6))
        gs = [rng.normal(rng.normal(0, 2), rng.uniform(0.2, 3), size=int(rng.integers(2, 9))) for _ in range(k)]
        allv = np.concatenate(gs)
        ssb = sum(len(g) * (g.mean() - allv.mean()) ** 2 for g in gs)
        ssw = sum(((g - g.mean()) ** 2).sum() for g in gs)
        ref = (ssb / (k - 1)) / (ssw / (len(allv) - k))
        worst = max(worst, abs(one_way_anova(gs)[0] - ref) / ref)
    F_same, p_same = one_way_anova([[3.0, 4.0, 5.0]] * 3)
    sep = np.random.default_rng(0)
    _, p_sep = one_way_anova([sep.normal(mu, 1.0, 40) for mu in (0.0, 100.0, 200.0)])
    ok = worst <= 1e-9 and F_same == 0.0 and p_sep < 1e-30
    assert report(8, ok, f"max rel F err {worst:.1e}, identical F={F_same:g}, separated p={p_sep:.1e}")


def test_pipeline_determinism(report, tmp_path):
    times = []
    for sub in ("a", "b"):
        t0 = time.perf_counter()
        code = main(["sweep", "--out", str(tmp_path / sub)])
        times.append(time.perf_counter() - t0)
        assert code == 0
    a, b = ((tmp_path / s / "sweep.csv").read_bytes() for s in ("a", "b"))
    n_rows = a.count(b"\n") - 1
    ok = a == b and max(times) < 10.0 and n_rows == 48 * 3
    assert report(9, ok, f"{n_rows} rows, identical={a == b}, slowest run {max(times):.2f} s")
