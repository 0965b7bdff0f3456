"""Sweep runner: every morphology x pulling direction x displacement."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import collapse_to_plane, tip_metrics
from .config import ExperimentConfig
from .geometry import MorphologySpec, build_tail
from .solver import ConvergenceError, LoadCase, euler_solve
from .tail import (
    FIXTURE_PATH,
    CalibrationFit,
    SaturationError,
    calibrate_linear,
    load_calibration_samples,
    pose_from_solve,
    predict_pose_uniform,
    uniform_bend_angle,
)

COLUMNS = (
    "case_id",
    "tail",
    "tracts",
    "displacement_mm",
    "joint_id",
    "rho_mm",
    "z_mm",
    "tip_perp_mm",
    "tip_radial_mm",
)


@dataclass(frozen=True)
class SweepCase:
    case_id: int
    spec: MorphologySpec
    tracts: tuple[int, ...]
    displacement: float


@dataclass(frozen=True)
class SweepRow:
    case_id: int
    tail: str
    tracts: str
    displacement_mm: float
    joint_id: int
    rho_mm: float
    z_mm: float
    tip_perp_mm: float
    tip_radial_mm: float


@dataclass(frozen=True)
class CaseFailure:
    case_id: int
    code: str
    message: str


def tracts_label(tracts: Sequence[int]) -> str:
    return "+".join(str(t) for t in tracts)


def expand_cases(config: ExperimentConfig) -> list[SweepCase]:
    """Cases in a fixed order: morphology, then direction, then displacement."""
    cases = []
    for spec in config.morphologies:
        for tracts in config.directions:
            for d in config.displacements:
                cases.append(SweepCase(len(cases), spec, tuple(tracts), float(d)))
    return cases


def _round(v: float) -> float:
    # fixed precision keeps CSV and JSON identical and platform independent
    return float(f"{v:.6f}")


def tracked_positions(
    case: SweepCase, method: str = "uniform", fit: CalibrationFit | None = None, steps: int = 200, delta=None
) -> np.ndarray:
    model = build_tail(case.spec)
    if method == "uniform":
        theta = uniform_bend_angle(model, case.tracts, case.displacement)
        pose = predict_pose_uniform(model, theta, case.tracts)
    elif method == "euler":
        load = LoadCase(tracts=case.tracts, displacement=case.displacement, steps=steps, record_history=False)
        pose = pose_from_solve(model, euler_solve(model, load, fit=fit, delta=delta))
    else:
        raise ValueError(f"unknown method {method!r}")
    return pose.tracked_points()


def run_case(case: SweepCase, method: str = "uniform", fit=None, steps: int = 200, delta=None):
    """Rows for one case, or a :class:`CaseFailure`."""
    try:
        pts = tracked_positions(case, method, fit, steps, delta)
        if not np.all(np.isfinite(pts)):
            raise ConvergenceError("non-finite tracked positions")
    except SaturationError as exc:
        return CaseFailure(case.case_id, "saturation", str(exc))
    except ConvergenceError as exc:
        return CaseFailure(case.case_id, "convergence", str(exc))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return CaseFailure(case.case_id, "error", f"{type(exc).__name__}: {exc}")
    planar = collapse_to_plane(pts)
    perp, radial = tip_metrics(planar)
    return [
        SweepRow(
            case_id=case.case_id,
            tail=case.spec.name,
            tracts=tracts_label(case.tracts),
            displacement_mm=_round(case.displacement),
            joint_id=j,
            rho_mm=_round(r),
            z_mm=_round(z),
            tip_perp_mm=_round(perp),
            tip_radial_mm=_round(radial),
        )
        for j, (r, z) in enumerate(zip(planar.rho, planar.z), start=1)
    ]


def _run_case_args(args):
    return run_case(*args)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    failures: list[CaseFailure]
    n_cases: int

    @property
    def ok(self) -> bool:
        return not self.failures


def sweep_fit(config: ExperimentConfig) -> CalibrationFit:
    return calibrate_linear(load_calibration_samples(config.calibration_fixture or FIXTURE_PATH))


def run_sweep(config: ExperimentConfig, jobs: int = 1, steps: int | None = None) -> SweepResult:
    cases = expand_cases(config)
    fit = sweep_fit(config) if config.method == "euler" else None
    n_steps = steps if steps is not None else config.steps
    args = [(c, config.method, fit, n_steps, config.delta) for c in cases]
    if jobs > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_case_args, args))
    else:
        outcomes = [_run_case_args(a) for a in args]
    rows, failures = [], []
    for out in outcomes:
        if isinstance(out, CaseFailure):
            failures.append(out)
        else:
            rows.extend(out)
    return SweepResult(rows, failures, len(cases))


# --- output ---------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def write_rows_csv(path: str | Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


def read_rows_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            SweepRow(
                case_id=int(r["case_id"]),
                tail=r["tail"],
                tracts=r["tracts"],
                displacement_mm=float(r["displacement_mm"]),
                joint_id=int(r["joint_id"]),
                rho_mm=float(r["rho_mm"]),
                z_mm=float(r["z_mm"]),
                tip_perp_mm=float(r["tip_perp_mm"]),
                tip_radial_mm=float(r["tip_radial_mm"]),
            )
            for r in reader
        ]


def write_rows_json(path: str | Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w") as fh:
        json.dump({"columns": list(COLUMNS), "rows": [asdict(r) for r in rows]}, fh, indent=1)
        fh.write("\n")


def read_rows_json(path: str | Path) -> list[SweepRow]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("columns") != list(COLUMNS):
        raise ValueError(f"{path}: unexpected columns {payload.get('columns')}")
    return [SweepRow(**r) for r in payload["rows"]]


def write_failures(path: str | Path, failures: Sequence[CaseFailure]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "error_code", "message"])
        for f in failures:
            w.writerow([f.case_id, f.code, f.message])


def emit_results(rows: Sequence[SweepRow], out_dir: str | Path, fmt: str = "csv", stem: str = "sweep") -> Path:
    """Write ``rows`` to ``out_dir/<stem>.<fmt>``; OSError propagates."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.{fmt}"
    (write_rows_csv if fmt == "csv" else write_rows_json)(path, rows)
    return path
