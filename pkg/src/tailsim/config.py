"""JSON morphology and experiment configuration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import GeometryError, JointProfile, MorphologySpec

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_EXPERIMENT = DATA_DIR / "default_experiment.json"

DEFAULT_DIRECTIONS = ((0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3), (3, 0))
METHODS = ("uniform", "euler")


class ConfigError(ValueError):
    pass


def _type_name(t) -> str:
    if isinstance(t, tuple):
        return " or ".join(_type_name(x) for x in t)
    return {float: "number", int: "integer", str: "string", list: "list", dict: "object", bool: "boolean"}.get(
        t, t.__name__
    )


def _check(value, types, key: str):
    ok = isinstance(value, types) and not (isinstance(value, bool) and bool not in _as_tuple(types))
    if not ok:
        raise ConfigError(f"{key}: expected {_type_name(types)}, got {type(value).__name__} {value!r}")
    return value


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _number(value, key: str, positive: bool = True, allow_zero: bool = False) -> float:
    _check(value, (int, float), key)
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    if positive and not (v > 0 or (allow_zero and v == 0)):
        raise ConfigError(f"{key}: expected a {'non-negative' if allow_zero else 'positive'} number, got {value!r}")
    return v


def _reject_unknown(obj: dict, allowed, where: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}; allowed: {', '.join(sorted(allowed))}")


JOINT_KEYS = {"h_mm": "h", "r1_mm": "r1", "r2_mm": "r2", "E_mpa": "E", "k_theta_nmm_per_rad": "k_theta"}
MORPHOLOGY_KEYS = ("name", "bones", "endcap_mm", "base_offset_mm", "tract_radius_mm", "tract_azimuth_deg", "joint")


def parse_morphology(obj: dict, where: str = "morphology") -> MorphologySpec:
    _check(obj, dict, where)
    _reject_unknown(obj, MORPHOLOGY_KEYS, where)
    if "bones" not in obj:
        raise ConfigError(f"{where}: missing required key bones (list of bone lengths in mm)")
    bones = _check(obj["bones"], list, "bones")
    if not bones:
        raise ConfigError("bones: expected at least one bone length")
    lengths = tuple(_number(b, f"bones[{i}]") for i, b in enumerate(bones))

    joint = obj.get("joint", {})
    _check(joint, dict, "joint")
    _reject_unknown(joint, JOINT_KEYS, "joint")
    kwargs = {JOINT_KEYS[k]: _number(v, f"joint.{k}") for k, v in joint.items()}

    spec_kwargs = {}
    if "endcap_mm" in obj:
        spec_kwargs["endcap_length"] = _number(obj["endcap_mm"], "endcap_mm")
    if "base_offset_mm" in obj:
        spec_kwargs["base_offset"] = _number(obj["base_offset_mm"], "base_offset_mm")
    if obj.get("tract_radius_mm") is not None:
        spec_kwargs["tract_radius"] = _number(obj["tract_radius_mm"], "tract_radius_mm")
    if "tract_azimuth_deg" in obj:
        az = _check(obj["tract_azimuth_deg"], list, "tract_azimuth_deg")
        spec_kwargs["tract_azimuths"] = tuple(
            math.radians(_number(a, f"tract_azimuth_deg[{i}]", positive=False)) for i, a in enumerate(az)
        )
    name = _check(obj.get("name", ""), str, "name")
    try:
        return MorphologySpec(
            bone_lengths=lengths, joint_profile=JointProfile(**kwargs), name=name, **spec_kwargs
        )
    except GeometryError as exc:
        raise ConfigError(f"{where}: {exc}".replace("bone_lengths", "bones")) from None


def load_json(path: str | Path):
    """Read JSON; OSError propagates, malformed content becomes ConfigError."""
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None


def load_morphology(path: str | Path) -> MorphologySpec:
    return parse_morphology(load_json(path), where=str(path))


@dataclass(frozen=True)
class ExperimentConfig:
    morphologies: tuple[MorphologySpec, ...]
    displacements: tuple[float, ...] = (12.0, 21.0)
    directions: tuple[tuple[int, ...], ...] = DEFAULT_DIRECTIONS
    method: str = "uniform"
    steps: int = 200
    delta: float | None = None
    calibration_fixture: Path | None = None
    output_dir: Path = Path("results")
    source: Path | None = field(default=None, compare=False)


EXPERIMENT_KEYS = (
    "morphologies",
    "displacements_mm",
    "directions",
    "one_motor",
    "two_motor",
    "method",
    "steps",
    "delta_mm",
    "calibration_fixture",
    "output_dir",
)


def _direction(value, key: str) -> tuple[int, ...]:
    _check(value, list, key)
    if len(value) not in (1, 2):
        raise ConfigError(f"{key}: expected one or two tract ids, got {value!r}")
    ids = tuple(_check(v, int, f"{key}[{i}]") for i, v in enumerate(value))
    for i, t in enumerate(ids):
        if t not in range(4):
            raise ConfigError(f"{key}[{i}]: tract id must be 0..3, got {t}")
    if len(ids) == 2 and (ids[0] - ids[1]) % 4 not in (1, 3):
        raise ConfigError(f"{key}: tracts {list(ids)} are not azimuth-adjacent")
    return ids


def parse_experiment(obj: dict, base_dir: Path = Path("."), source: Path | None = None) -> ExperimentConfig:
    _check(obj, dict, "config")
    _reject_unknown(obj, EXPERIMENT_KEYS, "config")
    if "morphologies" not in obj:
        raise ConfigError("config: missing required key morphologies (list of files or objects)")
    entries = _check(obj["morphologies"], list, "morphologies")
    if not entries:
        raise ConfigError("morphologies: expected at least one morphology")
    morphs = []
    for i, m in enumerate(entries):
        key = f"morphologies[{i}]"
        if isinstance(m, str):
            path = base_dir / m
            if not path.is_file():
                raise ConfigError(f"{key}: file not found: {path}")
            morphs.append(load_morphology(path))
        else:
            morphs.append(parse_morphology(_check(m, dict, key), where=key))
    names = [m.name for m in morphs]
    if len(set(names)) != len(names):
        raise ConfigError(f"morphologies: names must be unique, got {names}")

    disp = tuple(
        _number(d, f"displacements_mm[{i}]", allow_zero=True)
        for i, d in enumerate(_check(obj.get("displacements_mm", [12.0, 21.0]), list, "displacements_mm"))
    )
    if "directions" in obj:
        dirs = tuple(_direction(d, f"directions[{i}]") for i, d in enumerate(_check(obj["directions"], list, "directions")))
    else:
        one = _check(obj.get("one_motor", True), bool, "one_motor")
        two = _check(obj.get("two_motor", True), bool, "two_motor")
        dirs = tuple(d for d in DEFAULT_DIRECTIONS if (len(d) == 1 and one) or (len(d) == 2 and two))
    method = _check(obj.get("method", "uniform"), str, "method")
    if method not in METHODS:
        raise ConfigError(f"method: expected one of {', '.join(METHODS)}, got {method!r}")
    steps = _check(obj.get("steps", 200), int, "steps")
    if steps < 1:
        raise ConfigError(f"steps: expected a positive integer, got {steps}")
    delta = obj.get("delta_mm")
    delta = None if delta is None else _number(delta, "delta_mm")
    fixture = obj.get("calibration_fixture")
    if fixture is not None:
        fixture = base_dir / _check(fixture, str, "calibration_fixture")
        if not fixture.is_file():
            raise ConfigError(f"calibration_fixture: file not found: {fixture}")
    out = Path(_check(obj.get("output_dir", "results"), str, "output_dir"))
    return ExperimentConfig(
        morphologies=tuple(morphs),
        displacements=disp,
        directions=dirs,
        method=method,
        steps=steps,
        delta=delta,
        calibration_fixture=fixture,
        output_dir=out,
        source=source,
    )


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_experiment(load_json(path), base_dir=path.parent, source=path)
