"""Flat ``section.key = value`` run configuration.

Lines are ``section.key = value``; ``#`` starts a comment; blank lines are
ignored. Every key is validated against :data:`SCHEMA` (law parameters,
``law.<param>``, are checked by constructing the law).
"""

import csv
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CurvflowError
from .flowlaw import BUILTINS, make_builtin
from .geometry import PolygonalCurve, check_orientation, ellipse_polygon, regular_polygon
from .redistribution import RedistParams, ShapeSpec
from .stepper import StepControl, StopRule

OUTPUT_ENV = "CURVFLOW_OUT"

_TAU_PER_N2 = re.compile(r"^\s*([0-9.eE+-]+)\s*/\s*N\s*(\^|\*\*)\s*2\s*$")


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError("not an integer")
    return int(f)


def _floats(v):
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _ints(v):
    return tuple(_int(x) for x in str(v).split(",") if x.strip())


def _strs(v):
    return tuple(x.strip() for x in str(v).split(",") if x.strip())


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v

    return conv


def _tau(v):
    """A positive float, or ``c/N^2`` resolved per run."""
    m = _TAU_PER_N2.match(str(v))
    if m:
        return ("per_N2", float(m.group(1)))
    return float(v)


def _positive(v):
    return (v[1] if isinstance(v, tuple) else v) > 0


@dataclass(frozen=True)
class Key:
    convert: object
    default: object
    check: object = None
    rule: str = ""


_LAWS = tuple(sorted(BUILTINS)) + ("geodesic", "sharp")

SCHEMA = {
    "curve.kind": Key(_choice("circle", "ellipse", "paper_curve_a", "paper_curve_b", "points_csv"), "circle"),
    "curve.N": Key(_int, 100, lambda v: v >= 3, ">= 3"),
    "curve.a": Key(_float, 3.0, lambda v: v > 0, "> 0"),
    "curve.b": Key(_float, 1.0, lambda v: v > 0, "> 0"),
    "curve.radius": Key(_float, 1.0, lambda v: v > 0, "> 0"),
    "curve.path": Key(str, ""),
    "curve.snapshot": Key(_float, math.inf),
    "law.name": Key(_choice(*_LAWS), "curve_shortening"),
    "redistribution.shape": Key(_choice("smoothed", "power", "unit"), "smoothed"),
    "redistribution.epsilon": Key(_float, 0.1, lambda v: 0.0 <= v <= 1.0, "in [0, 1]"),
    "redistribution.p": Key(_float, 1.0, lambda v: v > 0, "> 0"),
    "redistribution.floor": Key(_float, 1e-6, lambda v: v > 0, "> 0"),
    "redistribution.kappa1": Key(_float, 100.0, lambda v: v >= 0, ">= 0"),
    "redistribution.kappa2": Key(_float, 100.0, lambda v: v >= 0, ">= 0"),
    "stepping.mode": Key(_choice("fixed", "adaptive"), "adaptive"),
    "stepping.tau": Key(_tau, ("per_N2", 0.1), _positive, "> 0"),
    "stepping.lambda": Key(_float, 1.0, lambda v: v > 0, "> 0"),
    "stepping.snapshot_interval": Key(_float, 0.01, lambda v: v > 0, "> 0"),
    "stopping.mode": Key(_choice("relative_stationary", "area_fraction", "none"), "area_fraction"),
    "stopping.delta": Key(_float, 0.01, lambda v: v > 0, "> 0"),
    "stopping.max_time": Key(_float, math.inf, lambda v: v > 0, "> 0"),
    "stopping.max_steps": Key(_int, 10_000_000, lambda v: v >= 1, ">= 1"),
    "output.directory": Key(str, ""),
    "output.formats": Key(_strs, ("csv", "svg"), lambda v: set(v) <= {"csv", "svg"}, "subset of csv, svg"),
    "image.path": Key(str, ""),
    "image.domain": Key(_floats, (-1.5, 1.5, -1.5, 1.5),
                        lambda v: len(v) == 4 and v[1] > v[0] and v[3] > v[2], "x_min,x_max,y_min,y_max"),
    "image.sigma": Key(_float, 2.0, lambda v: v >= 0, ">= 0"),
    "image.detector": Key(_choice("rational", "exponential"), "rational"),
    "image.F_max": Key(_float, 30.0, lambda v: v > 0, "> 0"),
    "image.F_min": Key(_float, -30.0, lambda v: v < 0, "< 0"),
    "eoc.N_list": Key(_ints, (16, 32, 64, 128, 256), lambda v: len(v) >= 1 and min(v) >= 3, "N >= 3"),
    "eoc.eps_list": Key(_floats, (0.0, 0.1, 0.5, 0.9), lambda v: all(0 <= e <= 1 for e in v), "in [0, 1]"),
    "eoc.t_end": Key(_float, 1.5, lambda v: v > 0, "> 0"),
    "eoc.M": Key(_int, 200, lambda v: v >= 1, ">= 1"),
    "eoc.alignment": Key(_choice("after", "before"), "after"),
    "eoc.window": Key(_choice("leading", "trailing"), "leading"),
    "eoc.workers": Key(_int, 1, lambda v: v >= 1, ">= 1"),
    "discrepancy.N": Key(_int, 100, lambda v: v >= 3, ">= 3"),
    "discrepancy.T": Key(_float, 1.0, lambda v: v > 0, "> 0"),
    "discrepancy.M": Key(_int, 200, lambda v: v >= 1, ">= 1"),
    "discrepancy.tau": Key(_float, 1e-5, lambda v: v > 0, "> 0"),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict
    law_params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def tau_for(self, N):
        tau = self.values["stepping.tau"]
        return tau[1] / N**2 if isinstance(tau, tuple) else tau

    def shape(self):
        kind = self["redistribution.shape"]
        if kind == "smoothed":
            return ShapeSpec.smoothed(self["redistribution.epsilon"])
        if kind == "power":
            return ShapeSpec.power(self["redistribution.p"], self["redistribution.floor"])
        return ShapeSpec.unit()

    def redist_params(self):
        return RedistParams(self.shape(), self["redistribution.kappa1"], self["redistribution.kappa2"])

    def step_control(self, N):
        if self["stepping.mode"] == "fixed":
            return StepControl.fixed(self.tau_for(N), self["stepping.snapshot_interval"])
        return StepControl.adaptive(self["stepping.lambda"], self["stepping.snapshot_interval"])

    def stop_rule(self):
        return StopRule(self["stopping.mode"], self["stopping.delta"],
                        self["stopping.max_time"], self["stopping.max_steps"])

    def output_dir(self, override=None):
        return override or self["output.directory"] or os.environ.get(OUTPUT_ENV) or "curvflow-out"

    def law(self):
        name = self["law.name"]
        if name in ("geodesic", "sharp"):
            raise ConfigError("law.name", f"{name!r} needs an image; use the segment command")
        return make_builtin(name, self.law_params)


def _split_lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        yield key, value


def parse_config(text, overrides=()):
    """Validate ``text`` (plus ``section.key=value`` overrides) into a RunConfig."""
    raw = dict(_split_lines(text))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    values = {k: spec.default for k, spec in SCHEMA.items()}
    law_params = {}
    for key, value in raw.items():
        if key.startswith("law.") and key != "law.name":
            try:
                law_params[key[4:]] = float(value)
            except ValueError:
                raise ConfigError(key, f"expected a number, got {value!r}") from None
            continue
        spec = SCHEMA.get(key)
        if spec is None:
            raise ConfigError(key, "unknown key")
        try:
            v = spec.convert(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(key, f"invalid value {value!r} ({exc})") from None
        if spec.check is not None and not spec.check(v):
            raise ConfigError(key, f"value {value!r} out of range ({spec.rule})")
        values[key] = v
    name = values["law.name"]
    if name in BUILTINS:
        try:
            make_builtin(name, law_params)
        except CurvflowError as exc:
            raise ConfigError("law." + (next(iter(law_params), "name")), str(exc)) from None
    elif law_params:
        raise ConfigError("law." + next(iter(law_params)), f"law {name!r} takes its parameters from image.*")
    if values["curve.kind"] == "points_csv" and not values["curve.path"]:
        raise ConfigError("curve.path", "required when curve.kind = points_csv")
    return RunConfig(values, law_params)


def load_config(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text, overrides)


# --- initial curves ------------------------------------------------------


def initial_curve_a(N):
    z = 2.0 * np.pi * np.arange(1, N + 1) / N
    x1 = np.cos(z)
    x3 = np.sin(3.0 * z) * np.sin(z)
    x2 = 0.7 * np.sin(z) + np.sin(x1) + x3**2
    return PolygonalCurve(np.column_stack((x1, x2)))


def initial_curve_b(N):
    z = 2.0 * np.pi * np.arange(1, N + 1) / N
    x1 = 1.5 * np.cos(z)
    x3 = np.sin(3.0 * z) * np.sin(z)
    x4 = 2.0 * x1**2
    x5 = 3.0 * np.exp(-x1)
    x2 = 1.5 * (0.6 * np.sin(z) + 0.5 * x3**2 + 0.4 * np.sin(x4) + 0.1 * np.sin(x5))
    return PolygonalCurve(np.column_stack((x1, x2)))


def read_points_csv(path, snapshot=math.inf):
    """Vertices from a CSV with ``x,y`` columns.

    Snapshot files (with a ``t`` column) yield the snapshot whose time is
    closest to ``snapshot`` (default: the last one).
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError("curve.path", str(exc)) from None
    if not rows:
        raise ConfigError("curve.path", f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        if "x" in header and "y" in header:
            ix, iy = header.index("x"), header.index("y")
            body = rows[1:]
        else:
            ix, iy, body = 0, 1, rows
        pts = np.array([[float(r[ix]), float(r[iy])] for r in body if r])
        if "t" in header:
            t = np.array([float(r[header.index("t")]) for r in body if r])
            times = np.unique(t)
            pick = times[-1] if math.isinf(snapshot) else times[np.argmin(np.abs(times - snapshot))]
            pts = pts[t == pick]
    except (ValueError, IndexError) as exc:
        raise ConfigError("curve.path", f"{path}: cannot parse points ({exc})") from None
    return PolygonalCurve(pts)


def build_curve(cfg):
    kind, N = cfg["curve.kind"], cfg["curve.N"]
    if kind == "circle":
        curve = regular_polygon(N, cfg["curve.radius"])
    elif kind == "ellipse":
        curve = ellipse_polygon(N, cfg["curve.a"], cfg["curve.b"])
    elif kind == "paper_curve_a":
        curve = initial_curve_a(N)
    elif kind == "paper_curve_b":
        curve = initial_curve_b(N)
    else:
        curve = read_points_csv(cfg["curve.path"], cfg["curve.snapshot"])
    check_orientation(curve)
    return curve
