"""Repeatability and group comparison on synthetic motion-capture trials.

Noise is added joint by joint, so it accumulates towards the tip just as
small errors at each joint would in a physical tail.

Run: python demos/05_trial_statistics.py
"""

import numpy as np

from tailsim import REFERENCE_MORPHOLOGIES, reference_tail
from tailsim.analysis import collapse_to_plane, compare_groups, pairwise_std, tip_metrics
from tailsim.cli import synthetic_trials

rng = np.random.default_rng(11)
trials = {name: synthetic_trials(reference_tail(name), (0,), 12.0, 10, 1.0, rng) for name in REFERENCE_MORPHOLOGIES}

print("spread of repeated trials per tracked point (mm)")
for name, runs in trials.items():
    planar = np.array([collapse_to_plane(p).points for p in runs.values()])
    print(f"  {name}: " + "  ".join(f"{s:.2f}" for s in pairwise_std(planar)))

radial = {name: [tip_metrics(collapse_to_plane(p))[1] for p in runs.values()] for name, runs in trials.items()}
stats = compare_groups(radial)
print(f"\ntip radial displacement: F = {stats.F:.1f}, p = {stats.p:.2e}")
print("pairwise p (Tukey-Kramer):")
for i, a in enumerate(stats.labels):
    print("  " + a + " " + " ".join(f"{stats.pairwise[i, j]:9.2e}" for j in range(len(stats.labels))))
