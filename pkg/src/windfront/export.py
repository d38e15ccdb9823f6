"""Deterministic CSV/JSON writers: fixed ordering, 17 significant digits."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """17-significant-digit rendering; ``inf``/``-inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent=2, _level=0) -> str:
    """JSON text with floats at 17 significant digits and non-finite floats as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return _json_str(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _json_str(s):
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def write_json(path, obj):
    Path(path).write_text(to_json(obj) + "\n")


def write_csv(path, header, rows):
    """Rows of already-formatted strings or numbers (numbers pass through :func:`fmt`)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else fmt(v)) for v in row) + "\n")


def cut_records(cuts):
    return [{"seed": c.seed, "t_cut": c.t_cut, "cause": c.cause, "witness": _witness(c.witness)} for c in cuts]


def _witness(w):
    if isinstance(w, dict):
        return {k: _witness(v) for k, v in w.items()}
    if isinstance(w, (np.integer, int)) and not isinstance(w, bool):
        return int(w)
    if isinstance(w, (np.floating, float)):
        return float(w)
    return w


def front_rows(wm, cuts, times):
    """Rows ``t,seed,x,y,alive`` for every seed with a valid sample at each time."""
    from .wavefront import cut_array, positions_at

    cut = cut_array(cuts)
    rows = []
    for t in times:
        P, ok = positions_at(wm, t)
        for i in np.flatnonzero(ok):
            rows.append([t, int(i), P[i, 0], P[i, 1], "1" if t <= cut[i] + 1e-12 else "0"])
    return rows


def trajectory_rows(wm, stride=1):
    """Rows ``seed,t,x,y`` seed-major, every ``stride``-th step plus the last valid one."""
    rows = []
    n = wm.x.shape[-1]
    for i in range(wm.n_seeds):
        end = int(wm.end[i])
        if wm.status[i] == "no_solution":
            continue
        ks = list(range(0, end + 1, stride))
        if ks[-1] != end:
            ks.append(end)
        for k in ks:
            rows.append([int(i), wm.t[k]] + [wm.x[k, i, c] for c in range(n)])
    return rows


def fronts_document(wm, cuts, times):
    from .wavefront import front_at

    fronts = []
    for t in times:
        sl = front_at(wm, cuts, t)
        fronts.append([line.tolist() for line in sl.polylines()])
    return {"times": list(times), "fronts": fronts, "cuts": cut_records(cuts)}
