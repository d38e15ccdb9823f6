"""Scenario files: parsing, validation, canonical rendering and object building.

A scenario is a TOML document with four tables::

    [metric]   kind = "zermelo" | "riemannian" | "isotropic" | "randers" | "kropina" | "sstk"
               plus the fields of that kind (numbers or expression strings),
               optional wind_csv, spacetime = "auto" | "finsler" | "sstk",
               optional domain = [xmin, xmax, ymin, ymax]
    [front]    shape = "point" | "circle" | "ellipse" | "polyline", center,
               radius, semi_axes, angle, file, vertices, closed, side
    [run]      dt, t_max, seeds, slice_times, cuts, renormalize,
               drift_tolerance, trajectory_stride, grid = {xmin, xmax, ymin, ymax, nx, ny}
    [output]   directory, formats = ["csv", "json"]

Every problem found is reported at once through :class:`ValidationError`.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import expr
from .errors import ParseError, ValidationError, WindfrontError
from .fields import GridField, as_field
from .finsler import (
    FinslerMetric,
    KropinaMetric,
    RandersMetric,
    RiemannianMetric,
    SSTKProjectedMetric,
    ZermeloMetric,
    isotropic,
)
from .geodesics import IntegratorParams
from .wavefront import Grid2D, InitialFront

METRIC_KINDS = {
    "zermelo": ("h", "W"),
    "riemannian": ("h",),
    "isotropic": ("speed",),
    "randers": ("h_tilde", "omega_tilde"),
    "kropina": ("h", "omega"),
    "sstk": ("Lambda", "omega", "g0"),
}
FIELD_SHAPES = {
    "h": (2, 2),
    "W": (2,),
    "speed": (),
    "h_tilde": (2, 2),
    "omega_tilde": (2,),
    "omega": (2,),
    "Lambda": (),
    "g0": (2, 2),
}
FRONT_SHAPES = ("point", "circle", "ellipse", "polyline")
FORMATS = ("csv", "json")

RUN_DEFAULTS = {
    "dt": 1e-3,
    "t_max": 1.0,
    "seeds": 256,
    "slice_times": None,  # defaults to [t_max]
    "cuts": True,
    "renormalize": True,
    "drift_tolerance": 1e-6,
    "trajectory_stride": 10,
}


@dataclass
class Scenario:
    metric: dict
    front: dict
    run: dict
    output: dict
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self, name) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


# -- parsing ---------------------------------------------------------------------

_TOML_POS = re.compile(r"\(at line (\d+), column (\d+)\)")


def _load_toml(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        m = _TOML_POS.search(msg)
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ParseError(_TOML_POS.sub("", msg).strip(), line, col) from None


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_field(path, value, shape, issues):
    """Numbers or expression strings arranged in ``shape``; returns the normalised value."""
    if shape == ():
        if _is_number(value):
            return float(value)
        if isinstance(value, str):
            try:
                expr.parse(value)
            except ParseError as exc:
                issues.append((path, str(exc)))
            return value
        issues.append((path, "expected a number or an expression string"))
        return value
    if not isinstance(value, list) or len(value) != shape[0]:
        issues.append((path, f"expected a list of length {shape[0]}"))
        return value
    return [_check_field(f"{path}[{i}]", v, shape[1:], issues) for i, v in enumerate(value)]


def _check_point(path, value, issues):
    if not (isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value)):
        issues.append((path, "expected [x, y]"))
        return value
    return [float(v) for v in value]


def _positive(path, value, issues, integer=False):
    ok = _is_number(value) and value > 0 and (not integer or isinstance(value, int))
    if not ok:
        issues.append((path, "expected a positive " + ("integer" if integer else "number")))
        return value
    return int(value) if integer else float(value)


def _unknown(table, name, allowed, issues):
    for key in table:
        if key not in allowed:
            issues.append((f"{name}.{key}", "unknown key"))


def _validate_metric(m, base_dir, issues):
    out = {}
    kind = m.get("kind")
    if kind not in METRIC_KINDS:
        issues.append(("metric.kind", f"expected one of {', '.join(METRIC_KINDS)}"))
        return dict(m)
    out["kind"] = kind
    allowed = {"kind", "spacetime", "domain", "wind_csv"} | set(METRIC_KINDS[kind])
    _unknown(m, "metric", allowed, issues)
    for name in METRIC_KINDS[kind]:
        if name == "W" and "wind_csv" in m:
            if name in m:
                issues.append(("metric.W", "give either W or wind_csv, not both"))
            continue
        if name not in m:
            if name == "h":
                out["h"] = [[1.0, 0.0], [0.0, 1.0]]
                continue
            issues.append((f"metric.{name}", "missing"))
            continue
        out[name] = _check_field(f"metric.{name}", m[name], FIELD_SHAPES[name], issues)
    if "wind_csv" in m:
        if kind != "zermelo":
            issues.append(("metric.wind_csv", "gridded wind is only used by kind = 'zermelo'"))
        elif not isinstance(m["wind_csv"], str):
            issues.append(("metric.wind_csv", "expected a file path"))
        else:
            path = m["wind_csv"]
            if not _resolve(base_dir, path).is_file():
                issues.append(("metric.wind_csv", f"file not found: {path}"))
            out["wind_csv"] = path
    mode = m.get("spacetime", "auto")
    if mode not in ("auto", "finsler", "sstk"):
        issues.append(("metric.spacetime", "expected 'auto', 'finsler' or 'sstk'"))
    out["spacetime"] = mode
    if "domain" in m:
        d = m["domain"]
        if not (isinstance(d, list) and len(d) == 4 and all(_is_number(v) for v in d)) or not (d[0] < d[1] and d[2] < d[3]):
            issues.append(("metric.domain", "expected [xmin, xmax, ymin, ymax] with xmin < xmax, ymin < ymax"))
        else:
            out["domain"] = [float(v) for v in d]
    return out


def _resolve(base_dir, name):
    p = Path(name)
    return p if p.is_absolute() else Path(base_dir) / p


def _validate_front(f, base_dir, issues):
    out = {}
    shape = f.get("shape")
    if shape not in FRONT_SHAPES:
        issues.append(("front.shape", f"expected one of {', '.join(FRONT_SHAPES)}"))
        return dict(f)
    out["shape"] = shape
    allowed = {"shape", "center", "side"}
    if shape == "point":
        allowed |= {"radius"}
    elif shape == "circle":
        allowed |= {"radius"}
    elif shape == "ellipse":
        allowed |= {"semi_axes", "angle"}
    else:
        allowed |= {"file", "vertices", "closed"}
    _unknown(f, "front", allowed, issues)
    side = f.get("side", "outward")
    if side not in ("outward", "inward"):
        issues.append(("front.side", "expected 'outward' or 'inward'"))
    out["side"] = side
    if shape != "polyline":
        out["center"] = _check_point("front.center", f.get("center", [0.0, 0.0]), issues)
    if shape == "point":
        if "radius" in f:
            out["radius"] = _positive("front.radius", f["radius"], issues)
        if side != "outward":
            issues.append(("front.side", "a point source only propagates outward"))
    elif shape == "circle":
        if "radius" not in f:
            issues.append(("front.radius", "missing"))
        else:
            out["radius"] = _positive("front.radius", f["radius"], issues)
    elif shape == "ellipse":
        ax = f.get("semi_axes")
        if not (isinstance(ax, list) and len(ax) == 2 and all(_is_number(v) and v > 0 for v in ax)):
            issues.append(("front.semi_axes", "expected [a, b] with a, b > 0"))
        else:
            out["semi_axes"] = [float(v) for v in ax]
        ang = f.get("angle", 0.0)
        if not _is_number(ang):
            issues.append(("front.angle", "expected a number (radians)"))
        else:
            out["angle"] = float(ang)
    else:
        if ("file" in f) == ("vertices" in f):
            issues.append(("front.file", "give exactly one of file or vertices"))
        if "file" in f:
            if not isinstance(f["file"], str):
                issues.append(("front.file", "expected a file path"))
            elif not _resolve(base_dir, f["file"]).is_file():
                issues.append(("front.file", f"file not found: {f['file']}"))
            else:
                out["file"] = f["file"]
        if "vertices" in f:
            v = f["vertices"]
            if not (isinstance(v, list) and len(v) >= 2 and all(isinstance(p, list) and len(p) == 2 and all(_is_number(c) for c in p) for p in v)):
                issues.append(("front.vertices", "expected a list of [x, y] pairs"))
            else:
                out["vertices"] = [[float(c) for c in p] for p in v]
        closed = f.get("closed", True)
        if not isinstance(closed, bool):
            issues.append(("front.closed", "expected true or false"))
        out["closed"] = closed
    return out


def _validate_run(r, issues):
    _unknown(r, "run", set(RUN_DEFAULTS) | {"grid"}, issues)
    out = {}
    dt = r.get("dt", RUN_DEFAULTS["dt"])
    t_max = r.get("t_max", RUN_DEFAULTS["t_max"])
    out["dt"] = _positive("run.dt", dt, issues)
    out["t_max"] = _positive("run.t_max", t_max, issues)
    if _is_number(dt) and _is_number(t_max) and dt > 0 and t_max > 0 and dt > t_max / 10:
        issues.append(("run.dt", f"dt = {dt:g} must not exceed t_max / 10 = {t_max / 10:g}"))
    seeds = r.get("seeds", RUN_DEFAULTS["seeds"])
    out["seeds"] = _positive("run.seeds", seeds, issues, integer=True)
    if isinstance(seeds, int) and not isinstance(seeds, bool) and 0 < seeds < 8:
        issues.append(("run.seeds", "need at least 8 seeds"))
    st = r.get("slice_times")
    if st is None:
        st = [float(t_max)] if _is_number(t_max) else []
    if not (isinstance(st, list) and all(_is_number(v) for v in st)):
        issues.append(("run.slice_times", "expected a list of times"))
    else:
        st = sorted(float(v) for v in st)
        if _is_number(t_max) and any(v < 0 or v > t_max for v in st):
            issues.append(("run.slice_times", "slice times must lie in [0, t_max]"))
    out["slice_times"] = st
    for key in ("cuts", "renormalize"):
        v = r.get(key, RUN_DEFAULTS[key])
        if not isinstance(v, bool):
            issues.append((f"run.{key}", "expected true or false"))
        out[key] = v
    out["drift_tolerance"] = _positive("run.drift_tolerance", r.get("drift_tolerance", RUN_DEFAULTS["drift_tolerance"]), issues)
    out["trajectory_stride"] = _positive(
        "run.trajectory_stride", r.get("trajectory_stride", RUN_DEFAULTS["trajectory_stride"]), issues, integer=True
    )
    if "grid" in r:
        g = r["grid"]
        keys = ("xmin", "xmax", "ymin", "ymax", "nx", "ny")
        if not isinstance(g, dict) or set(g) != set(keys):
            issues.append(("run.grid", "expected a table with xmin, xmax, ymin, ymax, nx, ny"))
        else:
            grid = {}
            for k in keys[:4]:
                if not _is_number(g[k]):
                    issues.append((f"run.grid.{k}", "expected a number"))
                grid[k] = float(g[k]) if _is_number(g[k]) else g[k]
            for k in keys[4:]:
                grid[k] = _positive(f"run.grid.{k}", g[k], issues, integer=True)
            if all(_is_number(grid[k]) for k in keys[:4]) and not (grid["xmin"] < grid["xmax"] and grid["ymin"] < grid["ymax"]):
                issues.append(("run.grid", "empty grid box"))
            out["grid"] = grid
    return out


def _validate_output(o, issues):
    _unknown(o, "output", {"directory", "formats"}, issues)
    out = {"directory": o.get("directory", "out")}
    if not isinstance(out["directory"], str):
        issues.append(("output.directory", "expected a path"))
    fmts = o.get("formats", list(FORMATS))
    if not (isinstance(fmts, list) and fmts and all(f in FORMATS for f in fmts)):
        issues.append(("output.formats", f"expected a non-empty list drawn from {list(FORMATS)}"))
    else:
        fmts = [f for f in FORMATS if f in fmts]
    out["formats"] = fmts
    return out


def parse_scenario(text: str, base_dir=".") -> Scenario:
    """Parse and validate; raises ParseError (syntax) or ValidationError (all field problems)."""
    doc = _load_toml(text)
    issues = []
    for name in doc:
        if name not in ("metric", "front", "run", "output"):
            issues.append((name, "unknown section"))
    tables = {}
    for name in ("metric", "front", "run", "output"):
        t = doc.get(name, {})
        if not isinstance(t, dict):
            issues.append((name, "expected a table"))
            t = {}
        if name in ("metric", "front") and name not in doc:
            issues.append((name, "missing section"))
        tables[name] = t
    metric = _validate_metric(tables["metric"], base_dir, issues) if "metric" in doc else {}
    front = _validate_front(tables["front"], base_dir, issues) if "front" in doc else {}
    run = _validate_run(tables["run"], issues)
    output = _validate_output(tables["output"], issues)
    if issues:
        raise ValidationError(issues)
    return Scenario(metric, front, run, output, Path(base_dir))


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path.parent)


# -- canonical rendering --------------------------------------------------------------


def _render_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_render_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_render_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(f"cannot render {type(v).__name__}")


def render_scenario(sc: Scenario) -> str:
    """Canonical TOML text; ``parse_scenario(render_scenario(s)) == s``."""
    lines = []
    for name in ("metric", "front", "run", "output"):
        lines.append(f"[{name}]")
        for k, v in getattr(sc, name).items():
            if v is None:
                continue
            lines.append(f"{k} = {_render_value(v)}")
        lines.append("")
    return "\n".join(lines)


# -- building engine objects ------------------------------------------------------------


def build_metric(sc: Scenario) -> FinslerMetric:
    m = sc.metric
    kind = m["kind"]
    try:
        if kind == "zermelo":
            W = GridField.from_wind_csv(sc.resolve(m["wind_csv"])) if "wind_csv" in m else m["W"]
            metric = ZermeloMetric(m["h"], W)
        elif kind == "riemannian":
            metric = RiemannianMetric(m["h"])
        elif kind == "isotropic":
            metric = isotropic(m["speed"])
        elif kind == "randers":
            metric = RandersMetric(m["h_tilde"], m["omega_tilde"])
        elif kind == "kropina":
            metric = KropinaMetric(m["h"], m["omega"])
        else:
            metric = SSTKProjectedMetric(m["Lambda"], m["omega"], m["g0"])
    except ParseError as exc:
        raise ValidationError([("metric", str(exc))]) from None
    if "domain" in m:
        d = m["domain"]
        metric.box = (np.array([d[0], d[2]]), np.array([d[1], d[3]]))
    return metric


def build_front(sc: Scenario, seeds=None) -> InitialFront:
    f = sc.front
    n = seeds or sc.run["seeds"]
    shape = f["shape"]
    if shape == "point":
        return InitialFront.point_source(f["center"], n, f.get("radius", 1e-6))
    if shape == "circle":
        return InitialFront.circle(f["center"], f["radius"], n)
    if shape == "ellipse":
        return InitialFront.ellipse(f["center"], f["semi_axes"], n, f.get("angle", 0.0))
    if "vertices" in f:
        verts = np.array(f["vertices"], float)
    else:
        verts = read_polyline_csv(sc.resolve(f["file"]))
    return InitialFront.polyline(verts, n, f.get("closed", True))


def read_polyline_csv(path):
    """Vertices from a CSV file with header ``x,y``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["x", "y"]:
        raise ValidationError([(str(path), "expected header x,y")])
    try:
        return np.array([[float(a), float(b)] for a, b in (r for r in rows[1:] if r)])
    except ValueError as exc:
        raise ValidationError([(str(path), f"bad vertex row: {exc}")]) from None


def build_params(sc: Scenario) -> IntegratorParams:
    r = sc.run
    return IntegratorParams(r["dt"], r["t_max"], r["renormalize"], r["drift_tolerance"])


def build_grid(sc: Scenario):
    g = sc.run.get("grid")
    if g is None:
        return None
    return Grid2D(g["xmin"], g["xmax"], g["ymin"], g["ymax"], g["nx"], g["ny"])


def check_scenario(sc: Scenario):
    """Build every object once so that semantic errors surface before a run."""
    issues = []
    try:
        metric = build_metric(sc)
    except (WindfrontError, ValueError) as exc:
        issues.append(("metric", str(exc)))
        metric = None
    try:
        front = build_front(sc)
    except ValidationError as exc:
        issues.extend(exc.issues)
        front = None
    except (WindfrontError, ValueError) as exc:
        issues.append(("front", str(exc)))
        front = None
    if metric is not None and front is not None:
        try:
            metric.membership(front.points[:1], 0.0, np.array([[1.0, 0.0]]))
        except (WindfrontError, ValueError, FloatingPointError) as exc:
            issues.append(("metric", f"cannot evaluate at the front: {exc}"))
    if issues:
        raise ValidationError(issues)
    return metric, front


def field_summary(sc: Scenario):
    """Short description of how each metric field is given (for ``check``)."""
    out = {}
    for k, v in sc.metric.items():
        if k in FIELD_SHAPES:
            f = as_field(v)
            out[k] = "constant" if f.constant else ("time-dependent" if f.time_dependent else "variable")
    if "wind_csv" in sc.metric:
        out["W"] = "gridded"
    return out
