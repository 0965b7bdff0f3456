"""The full design: 3 tails x 8 pulling directions x 2 displacements.

Equivalent to ``tailsim sweep --out demo_out``.

Run: python demos/04_sweep.py [out_dir]
"""

import sys
import time
from collections import defaultdict

from tailsim.config import DEFAULT_EXPERIMENT, parse_config
from tailsim.experiment import emit_results, run_sweep

out_dir = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
config = parse_config(DEFAULT_EXPERIMENT)
t0 = time.perf_counter()
result = run_sweep(config)
path = emit_results(result.rows, out_dir)
print(f"{result.n_cases} cases, {len(result.rows)} rows in {time.perf_counter() - t0:.2f} s -> {path}")

# directions only rotate the pose, so each tail has one answer per kind of pull
tips = defaultdict(set)
for r in result.rows:
    kind = "pair" if "+" in r.tracts else "single"
    tips[(r.tail, kind, r.displacement_mm)].add((r.tip_perp_mm, r.tip_radial_mm))
for key, vals in sorted(tips.items()):
    (perp, radial), = vals
    print(f"  {key[0]} {key[1]:6s} {key[2]:4.0f} mm: perp {perp:7.2f}  radial {radial:7.2f}")
