"""Regenerate src/tailsim/data/joint_pull_calibration.csv.

Three specimens x six pulls, 0-9 mm in 1 mm steps, linear through the
origin at 0.8143 N / 3 mm. Specimen-to-specimen slope scatter and
per-reading noise are set so the per-specimen spread (~0.04 N) and the
pooled R^2 (~0.994) hit their targets.
"""

import csv
from pathlib import Path

import numpy as np

SEED = 20240611
SLOPE = 0.8143 / 3.0
SPECIMEN_SLOPE_SCATTER = (-0.03, 0.0, 0.03)
READING_SD = 0.047
OUT = Path(__file__).resolve().parents[1] / "src" / "tailsim" / "data" / "joint_pull_calibration.csv"


def main():
    rng = np.random.default_rng(SEED)
    rows = []
    for scatter in SPECIMEN_SLOPE_SCATTER:
        for _ in range(6):
            for d in range(10):
                f = 0.0 if d == 0 else SLOPE * (1 + scatter) * d + rng.normal(0, READING_SD)
                rows.append((float(d), round(max(f, 0.0), 4)))
    with open(OUT, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["displacement_mm", "force_N"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
