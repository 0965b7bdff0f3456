"""Trial reduction: planar collapse, tip metrics, variability and group tests."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .stats import f_sf, studentized_range_sf


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class PlanarPose:
    """Tracked points as (radial distance from the axis, depth along it), mm."""

    rho: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if rho.shape != z.shape or rho.ndim != 1:
            raise AnalysisError(f"rho and z must be matching 1D arrays, got {rho.shape} and {z.shape}")
        if np.any(rho < 0):
            raise AnalysisError("rho must be non-negative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "z", z)

    def __len__(self):
        return len(self.rho)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.rho, self.z])


def collapse_to_plane(positions, axis=(0.0, 0.0, 1.0), origin=(0.0, 0.0, 0.0)) -> PlanarPose:
    """Drop the azimuth: keep only distance from the axis and depth along it."""
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0:
        raise AnalysisError("base frame axis must be nonzero")
    a = a / n
    p = np.atleast_2d(np.asarray(positions, dtype=float)) - np.asarray(origin, dtype=float)
    z = p @ a
    radial = p - np.outer(z, a)
    return PlanarPose(np.linalg.norm(radial, axis=1), z)


def tip_metrics(pose: PlanarPose) -> tuple[float, float]:
    """(perpendicular distance from the base plane, radial displacement) of the last point."""
    if len(pose) == 0:
        raise AnalysisError("empty pose")
    return float(pose.z[-1]), float(pose.rho[-1])


def pairwise_std(trials) -> np.ndarray:
    """Spread of repeated trials, per tracked point.

    ``trials`` is ``(n_trials, n_points, dim)`` or ``(n_trials, dim)``. The
    difference vectors over all ordered trial pairs have zero mean, so the
    population standard deviation reduces to the RMS pairwise distance.
    """
    x = np.asarray(trials, dtype=float)
    if x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3:
        raise AnalysisError(f"trials must be (n_trials, n_points, dim), got shape {x.shape}")
    m = len(x)
    if m < 2:
        raise AnalysisError(f"need at least 2 trials, got {m}")
    diff = x[:, None] - x[None, :]  # (m, m, points, dim)
    sq = np.sum(diff**2, axis=-1)
    mask = ~np.eye(m, dtype=bool)
    return np.sqrt(sq[mask].mean(axis=0))


def _groups(groups) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(out) < 2:
        raise AnalysisError(f"need at least 2 groups, got {len(out)}")
    for i, g in enumerate(out):
        if len(g) < 2:
            raise AnalysisError(f"group {i} has {len(g)} samples; need at least 2")
    return out


def _within(gs: list[np.ndarray]) -> tuple[float, int]:
    ss = sum(float(np.sum((g - g.mean()) ** 2)) for g in gs)
    return ss, sum(len(g) for g in gs) - len(gs)


def one_way_anova(groups) -> tuple[float, float]:
    """Between/within mean-square ratio and its F-distribution tail."""
    gs = _groups(groups)
    k = len(gs)
    allv = np.concatenate(gs)
    grand = allv.mean()
    ss_b = sum(len(g) * (g.mean() - grand) ** 2 for g in gs)
    ss_w, df_w = _within(gs)
    df_b = k - 1
    if ss_w == 0:
        if ss_b == 0 or np.all(allv == allv[0]):
            return 0.0, 1.0
        return math.inf, 0.0
    F = (ss_b / df_b) / (ss_w / df_w)
    return float(F), float(f_sf(F, df_b, df_w))


def tukey_hsd(groups) -> np.ndarray:
    """Symmetric matrix of Tukey-Kramer adjusted p values (ones on the diagonal)."""
    gs = _groups(groups)
    k = len(gs)
    ss_w, df_w = _within(gs)
    mse = ss_w / df_w
    P = np.ones((k, k))
    for i, j in combinations(range(k), 2):
        diff = abs(gs[i].mean() - gs[j].mean())
        if mse == 0:
            p = 1.0 if diff == 0 else 0.0
        else:
            se = math.sqrt(mse / 2 * (1 / len(gs[i]) + 1 / len(gs[j])))
            p = studentized_range_sf(diff / se, k, df_w)
        P[i, j] = P[j, i] = p
    return P


@dataclass
class GroupStats:
    labels: list
    samples: list
    F: float
    p: float
    pairwise: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise AnalysisError(f"p must lie in [0, 1], got {self.p}")
        if not self.F >= 0:
            raise AnalysisError(f"F must be non-negative, got {self.F}")

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "samples": [list(map(float, s)) for s in self.samples],
            "F": self.F,
            "p": self.p,
            "pairwise_p": self.pairwise.tolist(),
        }


def compare_groups(groups: Mapping[str, Sequence[float]]) -> GroupStats:
    labels = list(groups)
    samples = [np.asarray(groups[k], dtype=float) for k in labels]
    F, p = one_way_anova(samples)
    return GroupStats(labels, [s.tolist() for s in samples], F, p, tukey_hsd(samples))


def _as_pose_list(poses) -> list[PlanarPose]:
    return [poses] if isinstance(poses, PlanarPose) else list(poses)


def normalized_rms_error(predicted, reference, total_length: float) -> float:
    """RMS point error over every pose and point, as a percentage of ``total_length``."""
    pred = _as_pose_list(predicted)
    ref = _as_pose_list(reference)
    if len(pred) != len(ref):
        raise AnalysisError(f"{len(pred)} predicted poses vs {len(ref)} reference poses")
    if not total_length > 0:
        raise AnalysisError(f"total_length must be positive, got {total_length}")
    sq = []
    for i, (a, b) in enumerate(zip(pred, ref)):
        if len(a) != len(b):
            raise AnalysisError(f"pose {i}: {len(a)} predicted points vs {len(b)} reference points")
        sq.append(np.sum((a.points - b.points) ** 2, axis=1))
    if not sq:
        raise AnalysisError("no poses to compare")
    return float(np.sqrt(np.concatenate(sq).mean()) / total_length * 100.0)


# --- files ----------------------------------------------------------------

TRIAL_COLUMNS = ("trial_id", "joint_id", "x_mm", "y_mm", "z_mm")


def read_trials(path: str | Path) -> dict[str, np.ndarray]:
    """Trial file rows -> ``{trial_id: (n_joints, 3)}`` ordered by joint id."""
    rows: dict[str, dict[int, tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise AnalysisError(f"{path}: empty trial file")
        if tuple(header) != TRIAL_COLUMNS:
            raise AnalysisError(f"{path}: expected columns {','.join(TRIAL_COLUMNS)}, got {','.join(header)}")
        for lineno, r in enumerate(reader, start=2):
            if not r:
                continue
            if len(r) != 5:
                raise AnalysisError(f"{path}:{lineno}: expected 5 fields, got {len(r)}")
            try:
                joint = int(r[1])
                xyz = (float(r[2]), float(r[3]), float(r[4]))
            except ValueError as exc:
                raise AnalysisError(f"{path}:{lineno}: {exc}") from None
            trial = rows.setdefault(r[0].strip(), {})
            if joint in trial:
                raise AnalysisError(f"{path}:{lineno}: duplicate joint {joint} in trial {r[0]}")
            trial[joint] = xyz
    out = {}
    counts = {len(v) for v in rows.values()}
    if len(counts) > 1:
        raise AnalysisError(f"{path}: trials have differing joint counts {sorted(counts)}")
    for tid, joints in rows.items():
        out[tid] = np.array([joints[j] for j in sorted(joints)])
    return out


def write_trials(path: str | Path, trials: Mapping[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for tid, pts in trials.items():
            for j, p in enumerate(np.asarray(pts), start=1):
                w.writerow([tid, j, *(f"{v:.6f}" for v in p)])


@dataclass(frozen=True)
class TrialSummary:
    condition: str
    n_trials: int
    tip_perp_mm: float
    tip_radial_mm: float
    spread_mm: tuple


def summarize_trials(condition: str, trials: Mapping[str, np.ndarray]) -> TrialSummary:
    stack = np.array([trials[k] for k in trials])
    poses = [collapse_to_plane(t) for t in stack]
    tips = np.array([tip_metrics(p) for p in poses])
    planar = np.array([p.points for p in poses])
    return TrialSummary(
        condition=condition,
        n_trials=len(stack),
        tip_perp_mm=float(tips[:, 0].mean()),
        tip_radial_mm=float(tips[:, 1].mean()),
        spread_mm=tuple(float(v) for v in pairwise_std(planar)),
    )


def write_metrics_csv(path: str | Path, summaries: Sequence[TrialSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "n_trials", "tip_perp_mm", "tip_radial_mm", "joint_id", "spread_mm"])
        for s in summaries:
            for j, v in enumerate(s.spread_mm, start=1):
                w.writerow([s.condition, s.n_trials, f"{s.tip_perp_mm:.6f}", f"{s.tip_radial_mm:.6f}", j, f"{v:.6f}"])


def write_json(path: str | Path, payload) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(f"cannot serialise {type(o).__name__}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
