"""Two independent routes to the same equilibrium.

The incremental solver follows the load path with assembled stiffness
matrices; the oracle minimises total potential energy directly. They
share the model but no numerical machinery.

Run: python demos/02_solver_vs_energy.py
"""

import time

import numpy as np

from tailsim import LoadCase, build_tail, euler_solve, minimize_total_energy, reference_tail, single_joint_spec

joint = build_tail(single_joint_spec())
print("single joint")
print("  force   tendon   tip-x    gap (mm)")
for F in (0.1, 0.5, 0.8143, 1.5, 2.5):
    res = euler_solve(joint, LoadCase(force=F, record_history=False))
    eq = minimize_total_energy(joint, res.final_load)
    gap = np.abs(eq.positions - res.final_pose).max()
    print(f"  {F:5.3f}  {res.tendon_displacement:6.3f}  {res.final_pose[joint.tip_node, 0]:6.3f}  {gap:.1e}")

tail = build_tail(reference_tail("SLS"))
t0 = time.perf_counter()
res = euler_solve(tail, LoadCase(tracts=(1, 2), force=0.5, record_history=False))
t1 = time.perf_counter()
eq = minimize_total_energy(tail, res.final_load)
t2 = time.perf_counter()
print(f"\nSLS tail, two tracts at 0.5 N: joint bends {np.degrees(res.final_gamma).round(2)} deg")
print(f"  solver {t1 - t0:.2f} s, oracle {t2 - t1:.2f} s ({eq.iterations} iterations)")
print(f"  largest node gap {np.abs(eq.positions - res.final_pose).max():.3f} mm")
