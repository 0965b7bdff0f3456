"""Command-line entry point.

Exit codes: 0 success, 1 a case failed, 2 bad configuration or
arguments, 3 input/output error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import DEFAULT_EXPERIMENT, ConfigError, load_morphology, parse_config
from .experiment import (
    CaseFailure,
    SweepCase,
    emit_results,
    run_case,
    run_sweep,
    write_failures,
)
from .geometry import REFERENCE_MORPHOLOGIES, GeometryError, MorphologySpec, build_tail, reference_tail
from .oracle import NonConvergenceError, minimize_total_energy
from .solver import ConvergenceError, LoadCase, euler_solve
from .tail import (
    FIXTURE_PATH,
    CalibrationError,
    SaturationError,
    calibrate_linear,
    calibrate_spring_stiffness,
    load_calibration_samples,
    predict_pose_uniform,
    single_joint_displacement,
    uniform_bend_angle,
)

EXIT_OK, EXIT_CASE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class CaseError(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser, config_help: str):
    p.add_argument("--config", type=Path, help=config_help)
    p.add_argument("--out", type=Path, help="output directory (stdout when omitted)")
    p.add_argument("--steps", type=int, help="Euler load increments (default 200)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--seed", type=int, help="seed for synthetic data")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _tracts(text: str) -> tuple[int, ...]:
    try:
        ids = tuple(int(t) for t in text.replace("+", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tracts must look like 0 or 0,1; got {text!r}")
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailsim", description="Tendon-driven tail simulation and analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit the force-displacement fixture and calibrate k_theta")
    _common(p, "morphology JSON supplying the joint profile (default: built-in joint)")
    p.add_argument("--fixture", type=Path, default=FIXTURE_PATH, help="displacement_mm,force_N CSV")
    p.add_argument("--d-ref", type=float, default=3.0, help="displacement (mm) to match")

    for name, helptext in (("solve", "single Euler load case with full history"), ("predict", "uniform-bend pose")):
        p = sub.add_parser(name, help=helptext)
        _common(p, "morphology JSON")
        p.add_argument("--tail", choices=sorted(REFERENCE_MORPHOLOGIES), help="built-in morphology instead of --config")
        p.add_argument("--tracts", type=_tracts, default=(0,), help="tract id or adjacent pair, e.g. 0 or 0,1")
        p.add_argument("--displacement", type=float, help="tendon displacement (mm)")
        if name == "solve":
            p.add_argument("--force", type=float, help="tendon tension (N)")

    p = sub.add_parser("sweep", help="run every morphology x direction x displacement case")
    _common(p, "experiment JSON (default: the built-in three-tail design)")

    p = sub.add_parser("analyze", help="trial files -> tip metrics, variability and ANOVA")
    _common(p, "unused")
    p.add_argument("trials", nargs="*", type=Path, help="trial CSV files, one condition per file")
    p.add_argument("--synthetic", action="store_true", help="generate noisy trials around predictions (needs --seed)")
    p.add_argument("--n-trials", type=int, default=10)
    p.add_argument("--noise", type=float, default=1.0, help="per-joint noise SD (mm) for --synthetic")

    p = sub.add_parser("oracle", help="compare an Euler solve with direct energy minimisation")
    _common(p, "morphology JSON")
    p.add_argument("--tail", choices=sorted(REFERENCE_MORPHOLOGIES))
    p.add_argument("--tracts", type=_tracts, default=(0,))
    p.add_argument("--force", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-5)
    return parser


# --- helpers --------------------------------------------------------------


def _morphology(args, default: str | None = None) -> MorphologySpec:
    if args.config is not None:
        if getattr(args, "tail", None):
            raise ConfigError("give either --config or --tail, not both")
        return load_morphology(args.config)
    name = getattr(args, "tail", None) or default
    if name is None:
        raise ConfigError("a morphology is required: --config <file> or --tail NAME")
    return reference_tail(name)


def _steps(args, default: int = 200) -> int:
    steps = default if args.steps is None else args.steps
    if steps < 1:
        raise ConfigError(f"--steps must be positive, got {steps}")
    return steps


def _write_table(path: Path | None, header, rows) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path is not None:
            fh.close()


def _write_json(path: Path | None, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _out_file(args, stem: str) -> Path | None:
    if args.out is None:
        return None
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out / f"{stem}.{args.format}"


def _f(v: float) -> str:
    return f"{v:.6f}"


# --- commands -------------------------------------------------------------


def cmd_calibrate(args) -> int:
    profile = _morphology(args, default="SSL").joint_profile
    samples = load_calibration_samples(args.fixture)
    fit = calibrate_linear(samples)
    steps = _steps(args)
    k = calibrate_spring_stiffness(fit, profile, d_ref=args.d_ref, steps=steps)
    force = fit.force(args.d_ref)
    d = single_joint_displacement(profile, k, force, steps)
    result = {
        "slope_n_per_mm": fit.slope,
        "intercept_n": fit.intercept,
        "r_squared": fit.r_squared,
        "k_theta_nmm_per_rad": k,
        "d_ref_mm": args.d_ref,
        "force_at_d_ref_n": force,
        "simulated_displacement_mm": d,
        "n_samples": int(len(samples)),
    }
    path = _out_file(args, "calibration")
    if args.format == "json":
        _write_json(path, result)
    else:
        _write_table(path, ["quantity", "value"], [[k_, repr(v) if isinstance(v, float) else v] for k_, v in result.items()])
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = _morphology(args)
    if (args.force is None) == (args.displacement is None):
        raise ConfigError("give exactly one of --force or --displacement")
    model = build_tail(spec)
    fit = calibrate_linear(load_calibration_samples()) if args.displacement is not None else None
    case = LoadCase(tracts=args.tracts, force=args.force, displacement=args.displacement, steps=_steps(args))
    try:
        res = euler_solve(model, case, fit=fit)
    except ConvergenceError as exc:
        raise CaseError(str(exc)) from exc
    path = _out_file(args, "solve")
    if args.format == "json":
        _write_json(
            path,
            {
                "tail": spec.name,
                "tracts": list(case.tracts),
                "force_history_n": res.force_history.tolist(),
                "tendon_history_mm": res.tendon_history.tolist(),
                "gamma_history_rad": res.gamma_history.tolist(),
                "node_history_mm": res.node_history.tolist(),
            },
        )
    else:
        rows = []
        for k, (F, dt, nodes) in enumerate(zip(res.force_history, res.tendon_history, res.node_history)):
            for i, p in enumerate(nodes):
                rows.append([k, _f(F), _f(dt), i, _f(p[0]), _f(p[1]), _f(p[2])])
        _write_table(path, ["step", "force_n", "tendon_mm", "node_id", "x_mm", "y_mm", "z_mm"], rows)
    return EXIT_OK


def _emit_rows(args, rows, stem: str) -> None:
    if args.out is None:
        from .experiment import COLUMNS, _fmt

        if args.format == "json":
            from dataclasses import asdict

            _write_json(None, {"columns": list(COLUMNS), "rows": [asdict(r) for r in rows]})
        else:
            _write_table(None, COLUMNS, [[_fmt(getattr(r, c)) for c in COLUMNS] for r in rows])
    else:
        emit_results(rows, args.out, args.format, stem=stem)


def cmd_predict(args) -> int:
    spec = _morphology(args)
    if args.displacement is None:
        raise ConfigError("--displacement is required")
    if args.displacement < 0:
        raise ConfigError(f"--displacement must be non-negative, got {args.displacement}")
    out = run_case(SweepCase(0, spec, tuple(args.tracts), args.displacement))
    if isinstance(out, CaseFailure):
        raise CaseError(f"{out.code}: {out.message}")
    _emit_rows(args, out, "predict")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = parse_config(args.config if args.config is not None else DEFAULT_EXPERIMENT)
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be positive, got {args.jobs}")
    result = run_sweep(config, jobs=args.jobs, steps=None if args.steps is None else _steps(args))
    _emit_rows(args, result.rows, "sweep")
    if result.failures:
        for f in result.failures:
            print(f"case {f.case_id} failed ({f.code}): {f.message}", file=sys.stderr)
        if args.out is not None:
            write_failures(args.out / "sweep_errors.csv", result.failures)
        return EXIT_CASE
    return EXIT_OK


def synthetic_trials(spec: MorphologySpec, tracts, d: float, n_trials: int, noise: float, rng) -> dict:
    """Noisy repeats of the uniform-bend pose; the error accumulates along the chain."""
    model = build_tail(spec)
    pts = predict_pose_uniform(model, uniform_bend_angle(model, tracts, d), tracts).tracked_points()
    out = {}
    for t in range(n_trials):
        steps = rng.normal(0.0, noise, size=pts.shape)
        out[f"{spec.name}-{t + 1:02d}"] = pts + np.cumsum(steps, axis=0)
    return out


def cmd_analyze(args) -> int:
    if args.synthetic:
        if args.seed is None:
            raise ConfigError("--synthetic needs --seed so the generated trials are reproducible")
        if args.trials:
            raise ConfigError("give trial files or --synthetic, not both")
        if args.n_trials < 2:
            raise ConfigError(f"--n-trials must be at least 2, got {args.n_trials}")
        rng = np.random.default_rng(args.seed)
        conditions = {name: synthetic_trials(reference_tail(name), (0,), 12.0, args.n_trials, args.noise, rng) for name in REFERENCE_MORPHOLOGIES}
        if args.out is not None:
            tdir = args.out / "trials"
            tdir.mkdir(parents=True, exist_ok=True)
            for name, trials in conditions.items():
                analysis.write_trials(tdir / f"{name}.csv", trials)
    else:
        if not args.trials:
            raise ConfigError("no trial files given (or use --synthetic --seed N)")
        conditions = {}
        for path in args.trials:
            try:
                conditions[path.stem] = analysis.read_trials(path)
            except analysis.AnalysisError as exc:
                raise ConfigError(str(exc)) from None

    summaries = [analysis.summarize_trials(name, trials) for name, trials in conditions.items()]
    report = {"conditions": [s.condition for s in summaries]}
    if len(conditions) >= 2 and all(len(t) >= 2 for t in conditions.values()):
        for metric, idx in (("tip_perp", 0), ("tip_radial", 1)):
            groups = {
                name: [analysis.tip_metrics(analysis.collapse_to_plane(p))[idx] for p in trials.values()]
                for name, trials in conditions.items()
            }
            report[metric] = analysis.compare_groups(groups).to_dict()
    if args.out is None:
        _write_json(None, {"summaries": [s.__dict__ for s in summaries], **report})
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        analysis.write_metrics_csv(args.out / "metrics.csv", summaries)
        analysis.write_json(args.out / "analysis.json", {"summaries": summaries, **report})
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = _morphology(args, default=None) if (args.config or args.tail) else None
    if spec is None:
        from .geometry import single_joint_spec

        spec = single_joint_spec()
    model = build_tail(spec)
    res = euler_solve(model, LoadCase(tracts=args.tracts, force=args.force, steps=_steps(args), record_history=False))
    try:
        eq = minimize_total_energy(model, res.final_load, tol=args.tol)
    except NonConvergenceError as exc:
        raise CaseError(str(exc)) from exc
    gap = np.linalg.norm(eq.positions - res.final_pose, axis=1)
    payload = {
        "tail": spec.name or "single-joint",
        "force_n": args.force,
        "max_node_gap_mm": float(gap.max()),
        "gap_over_h": float(gap.max() / spec.joint_profile.h),
        "oracle_iterations": eq.iterations,
        "oracle_grad_norm": eq.grad_norm,
    }
    path = _out_file(args, "oracle")
    if args.format == "json":
        _write_json(path, payload)
    else:
        _write_table(path, ["quantity", "value"], [[k, v] for k, v in payload.items()])
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "solve": cmd_solve,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GeometryError, CalibrationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CaseError, SaturationError, ConvergenceError) as exc:
        print(f"case failed: {exc}", file=sys.stderr)
        return EXIT_CASE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
