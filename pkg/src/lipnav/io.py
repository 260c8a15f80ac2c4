"""Environment and config JSON, trajectory CSV and benchmark report JSON.

Loaders validate strictly and raise :class:`FormatError` naming the offending
field or line. Savers write floats with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Optional

from .environment import Environment
from .lip import LipParams
from .planner import PlannerConfig
from .safety import CbfConfig, Circle, Ellipse, KinematicLimits
from .sim import BenchmarkTable, Disturbance, EpisodeLog, SimConfig

TRAJECTORY_HEADER = (
    "time_s",
    "step",
    "p_x",
    "v_x",
    "p_y",
    "v_y",
    "theta",
    "f_x",
    "f_y",
    "omega",
    "stance",
    "solver_status",
    "max_slack",
    "min_h_true",
    "min_h_inflated",
)


class FormatError(ValueError):
    """Malformed input file; the message names the file position or field."""


# ---------------------------------------------------------------- helpers


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _dump_json(obj) -> str:
    # json writes floats with repr, i.e. the shortest string that round-trips
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _check_keys(obj, allowed, required, where: str):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise FormatError(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise FormatError(f"{where}: missing field(s) {', '.join(missing)}")


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise FormatError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _integer(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"{where}: expected an integer, got {v!r}")
    return v


def _boolean(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise FormatError(f"{where}: expected true or false, got {v!r}")
    return v


def _pair(v, where: str) -> tuple[float, float]:
    if not isinstance(v, list) or len(v) != 2:
        raise FormatError(f"{where}: expected [x, y]")
    return (_number(v[0], f"{where}[0]"), _number(v[1], f"{where}[1]"))


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path, text: str, newline: Optional[str] = None):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline=newline) as fh:
        fh.write(text)


# ---------------------------------------------------------------- environment


def environment_to_dict(env: Environment) -> dict:
    obstacles = []
    for o in env.obstacles:
        if isinstance(o, Circle):
            obstacles.append({"type": "circle", "center": [o.center_x, o.center_y], "radius": o.radius})
        else:
            obstacles.append(
                {
                    "type": "ellipse",
                    "center": [o.center_x, o.center_y],
                    "semi_major": o.semi_major,
                    "semi_minor": o.semi_minor,
                    "rotation": o.rotation,
                }
            )
    return {
        "seed": env.seed,
        "start": list(env.start),
        "goal": list(env.goal),
        "bounds": list(env.bounds),
        "obstacles": obstacles,
    }


def _obstacle_from_dict(d, where: str):
    if not isinstance(d, dict) or "type" not in d:
        raise FormatError(f"{where}: expected an object with a 'type' field")
    kind = d["type"]
    if kind == "circle":
        _check_keys(d, ("type", "center", "radius"), ("type", "center", "radius"), where)
        cx, cy = _pair(d["center"], f"{where}.center")
        r = _number(d["radius"], f"{where}.radius")
        if r <= 0:
            raise FormatError(f"{where}.radius: must be positive, got {r!r}")
        return Circle(cx, cy, r)
    if kind == "ellipse":
        keys = ("type", "center", "semi_major", "semi_minor", "rotation")
        _check_keys(d, keys, keys, where)
        cx, cy = _pair(d["center"], f"{where}.center")
        a = _number(d["semi_major"], f"{where}.semi_major")
        b = _number(d["semi_minor"], f"{where}.semi_minor")
        rot = _number(d["rotation"], f"{where}.rotation")
        if not a >= b > 0:
            raise FormatError(f"{where}: need semi_major >= semi_minor > 0, got {a!r} and {b!r}")
        return Ellipse(cx, cy, a, b, rot)
    raise FormatError(f"{where}.type: expected 'circle' or 'ellipse', got {kind!r}")


def environment_from_dict(d) -> Environment:
    keys = ("seed", "start", "goal", "bounds", "obstacles")
    _check_keys(d, keys, keys, "environment")
    seed = _integer(d["seed"], "seed")
    if not 0 <= seed < 2**64:
        raise FormatError(f"seed: must fit in 64 unsigned bits, got {seed}")
    bounds = d["bounds"]
    if not isinstance(bounds, list) or len(bounds) != 4:
        raise FormatError("bounds: expected [xmin, ymin, xmax, ymax]")
    bounds = tuple(_number(v, f"bounds[{i}]") for i, v in enumerate(bounds))
    if not (bounds[0] < bounds[2] and bounds[1] < bounds[3]):
        raise FormatError("bounds: need xmin < xmax and ymin < ymax")
    if not isinstance(d["obstacles"], list):
        raise FormatError("obstacles: expected a list")
    obstacles = tuple(_obstacle_from_dict(o, f"obstacles[{i}]") for i, o in enumerate(d["obstacles"]))
    return Environment(obstacles, _pair(d["start"], "start"), _pair(d["goal"], "goal"), bounds, seed)


def dumps_environment(env: Environment) -> str:
    return _dump_json(environment_to_dict(env))


def loads_environment(text: str) -> Environment:
    return environment_from_dict(_load_json(text, "environment"))


def save_environment(env: Environment, path):
    _write(path, dumps_environment(env))


def load_environment(path) -> Environment:
    try:
        return loads_environment(_read(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- config


def _dataclass_from_dict(cls, d, where: str, nested=None):
    nested = nested or {}
    names = [f.name for f in fields(cls) if f.init]
    _check_keys(d, names, (), where)
    defaults = cls()
    kw = {}
    for name in names:
        if name not in d:
            continue
        v = d[name]
        cur = getattr(defaults, name)
        key = f"{where}.{name}"
        if name in nested:
            kw[name] = nested[name](v, key)
        elif isinstance(cur, bool):
            kw[name] = _boolean(v, key)
        elif isinstance(cur, int):
            kw[name] = _integer(v, key)
        elif isinstance(cur, float):
            kw[name] = _number(v, key)
        elif isinstance(cur, tuple):
            kw[name] = _pair(v, key)
        else:  # pragma: no cover - every field type is handled above
            raise FormatError(f"{key}: unsupported field")
    try:
        return cls(**kw)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _disturbance(v, where):
    if v is None:
        return None
    return _dataclass_from_dict(Disturbance, v, where)


def config_from_dict(d) -> tuple[PlannerConfig, LipParams, SimConfig]:
    """Planner, pendulum and simulator settings; every field is optional.

    Layout: the top level mirrors :class:`PlannerConfig` (with nested
    ``limits`` and ``cbf`` objects) plus ``lip`` for :class:`LipParams` and
    ``sim`` for :class:`SimConfig`.
    """
    if not isinstance(d, dict):
        raise FormatError("config: expected an object")
    d = dict(d)
    lip = d.pop("lip", {})
    sim = d.pop("sim", {})
    cfg = _dataclass_from_dict(
        PlannerConfig,
        d,
        "config",
        nested={
            "limits": lambda v, w: _dataclass_from_dict(KinematicLimits, v, w),
            "cbf": lambda v, w: _dataclass_from_dict(CbfConfig, v, w),
        },
    )
    params = _dataclass_from_dict(LipParams, lip, "config.lip")
    simc = _dataclass_from_dict(SimConfig, sim, "config.sim", nested={"disturbance": _disturbance})
    return cfg, params, simc


def config_to_dict(cfg: PlannerConfig, params: LipParams = LipParams(), sim: SimConfig = SimConfig()) -> dict:
    out = asdict(cfg)
    out["goal"] = list(cfg.goal)
    out["lip"] = {f.name: getattr(params, f.name) for f in fields(LipParams) if f.init}
    out["sim"] = asdict(sim)
    return out


def loads_config(text: str):
    return config_from_dict(_load_json(text, "config"))


def load_config(path):
    try:
        return loads_config(_read(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_config(path, cfg: PlannerConfig, params: LipParams = LipParams(), sim: SimConfig = SimConfig()):
    _write(path, _dump_json(config_to_dict(cfg, params, sim)))


# ---------------------------------------------------------------- trajectory


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_rows(log: EpisodeLog):
    for s in log.samples:
        x, u = s.state, s.control
        yield [
            _fmt(s.time),
            str(s.step),
            _fmt(x.p_x),
            _fmt(x.v_x),
            _fmt(x.p_y),
            _fmt(x.v_y),
            _fmt(x.theta),
            _fmt(u.f_x),
            _fmt(u.f_y),
            _fmt(u.omega),
            s.stance.value,
            s.status.value,
            _fmt(s.max_slack),
            _fmt(s.min_h_true),
            _fmt(s.min_h_inflated),
        ]


def dumps_trajectory(log: EpisodeLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    w.writerows(trajectory_rows(log))
    return buf.getvalue()


def save_trajectory(log: EpisodeLog, path):
    _write(path, dumps_trajectory(log), newline="")


_STANCES = ("left", "right")
_STATUSES = ("Optimal", "SlackRelaxed", "MaxIterations", "Failed")


def loads_trajectory(text: str) -> list[dict]:
    """Parse a trajectory CSV into one dict per row (numbers as float/int)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("trajectory: empty file") from None
    if tuple(header) != TRAJECTORY_HEADER:
        raise FormatError(f"trajectory line 1: header must be exactly {','.join(TRAJECTORY_HEADER)}")
    rows = []
    for line, rec in enumerate(reader, start=2):
        if len(rec) != len(TRAJECTORY_HEADER):
            raise FormatError(f"trajectory line {line}: expected {len(TRAJECTORY_HEADER)} fields, got {len(rec)}")
        row: dict[str, Any] = {}
        for name, val in zip(TRAJECTORY_HEADER, rec):
            try:
                if name == "step":
                    row[name] = int(val)
                elif name in ("stance", "solver_status"):
                    allowed = _STANCES if name == "stance" else _STATUSES
                    if val not in allowed:
                        raise ValueError
                    row[name] = val
                else:
                    row[name] = float(val)
            except ValueError:
                raise FormatError(f"trajectory line {line}, field {name}: bad value {val!r}") from None
        rows.append(row)
    return rows


def load_trajectory(path) -> list[dict]:
    try:
        return loads_trajectory(_read(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- report


def report_to_dict(table: BenchmarkTable, config: Optional[dict] = None, names: Optional[list] = None) -> dict:
    """Per-planner counts, per-episode rows and the config echo.

    Wall times are left out so that the report depends only on its inputs.
    ``names`` optionally lists the environment file of each environment, in
    the order the environments were benchmarked.
    """
    rows = []
    for i, r in enumerate(table.rows):
        row = {
            "planner": r.planner,
            "seed": r.seed,
            "finish": r.outcome.finish,
            "violate": r.outcome.violate,
            "enter": r.outcome.enter,
            "collide": r.outcome.collide,
            "steps": r.steps,
            "termination": r.termination,
        }
        if names:
            row["env"] = names[i % len(names)]
        if r.error is not None:
            row["error"] = r.error
        rows.append(row)
    return {
        "planners": {p: table.counts(p) for p in table.planners},
        "episodes": rows,
        "config": config if config is not None else {},
    }


def save_report(table: BenchmarkTable, path, config: Optional[dict] = None, names: Optional[list] = None):
    _write(path, _dump_json(report_to_dict(table, config, names)))


def load_report(path) -> dict:
    d = _load_json(_read(path), str(path))
    _check_keys(d, ("planners", "episodes", "config"), ("planners", "episodes", "config"), "report")
    for p, counts in d["planners"].items():
        sel = [r for r in d["episodes"] if r.get("planner") == p]
        for k in ("finish", "violate", "enter", "collide"):
            if counts.get(k) != sum(bool(r.get(k)) for r in sel):
                raise FormatError(f"report: {p}.{k} does not equal the sum of its episode flags")
    return d


def environment_files(directory) -> list[Path]:
    """Environment JSON files in ``directory`` in name order."""
    d = Path(directory)
    if not d.is_dir():
        raise OSError(f"not a directory: {directory}")
    return sorted(p for p in d.iterdir() if p.suffix == ".json" and p.is_file())
