"""Where does each tail's tip go for the same tendon pull?

All three tails are 150 mm long and differ only in the order of their
bones. With every joint bending equally, the long distal bone of SSL
swings its tip furthest from the axis.

Run: python demos/03_morphology_comparison.py
"""

import math

from tailsim import build_tail, collapse_to_plane, reference_tail, predict_pose_uniform, tip_metrics, uniform_bend_angle

for tracts, label in (((0,), "one motor"), ((0, 1), "two motors")):
    print(f"{label}")
    print("  tail   d(mm)  bend/joint  perp(mm)  radial(mm)")
    for d in (12.0, 21.0):
        for name in ("SSL", "SLS", "LSS"):
            model = build_tail(reference_tail(name))
            theta = uniform_bend_angle(model, tracts, d)
            pose = predict_pose_uniform(model, theta, tracts)
            perp, radial = tip_metrics(collapse_to_plane(pose.tracked_points()))
            print(f"  {name}   {d:5.1f}  {math.degrees(theta):8.2f}   {perp:8.2f}  {radial:9.2f}")
    print()
