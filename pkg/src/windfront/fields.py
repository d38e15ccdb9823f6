"""Scalar, vector and matrix fields on (t, x) with spatial/temporal derivatives.

Every field is evaluated in batch: ``x`` has shape ``(*batch, n)`` and ``t`` is
a scalar or broadcastable to ``batch``. ``derivatives`` returns an array of
shape ``(n + 1, *batch, *shape)`` ordered ``(d/dt, d/dx1, ..., d/dxn)``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import expr
from .errors import ValidationError


class Field:
    shape: tuple = ()
    constant = False
    time_dependent = True
    bounds = None  # (lo, hi) spatial box or None for unbounded

    def __call__(self, x, t):
        raise NotImplementedError

    def derivatives(self, x, t):
        raise NotImplementedError

    def __neg__(self):
        return ScaledField(self, -1.0)


class ConstantField(Field):
    constant = True
    time_dependent = False

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)
        self.shape = self.value.shape

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.value, x.shape[:-1] + self.shape)

    def derivatives(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[-1] + 1,) + x.shape[:-1] + self.shape)

    def __neg__(self):
        return ConstantField(-self.value)

    def __repr__(self):
        return f"ConstantField({self.value.tolist()!r})"


class ExpressionField(Field):
    """Closed-form field; each component is an expression string or number."""

    def __init__(self, components):
        arr = np.asarray(components, dtype=object)
        self.shape = arr.shape
        self.sources = arr
        self._nodes = np.empty(arr.shape, dtype=object)
        free = set()
        for idx in np.ndindex(*arr.shape) if arr.shape else [()]:
            node = expr.parse(arr[idx]) if isinstance(arr[idx], str) else expr.Num(float(arr[idx]))
            self._nodes[idx] = node
            free |= expr.free_variables(node)
        self.time_dependent = "t" in free
        self.constant = not free
        self._derivs = {}
        self._index = list(np.ndindex(*self.shape)) if self.shape else [()]

    def _deriv_nodes(self, var):
        if var not in self._derivs:
            out = np.empty(self.shape, dtype=object)
            for idx in np.ndindex(*self.shape) if self.shape else [()]:
                out[idx] = expr.diff(self._nodes[idx], var)
            self._derivs[var] = out
        return self._derivs[var]

    @staticmethod
    def _env(x, t):
        x = np.asarray(x)
        env = {"t": t if np.ndim(t) == 0 else np.asarray(t)}
        for k, name in enumerate(("x", "y", "z")[: x.shape[-1]]):
            env[name] = x[..., k]
        return env, x.shape[:-1]

    def _eval_nodes(self, nodes, env, batch, dtype):
        out = np.empty(batch + self.shape, dtype=dtype)
        for idx in self._index:
            out[(...,) + idx] = expr.evaluate(nodes[idx], env)
        return out

    @staticmethod
    def _dtype(x, t):
        return complex if np.iscomplexobj(x) or np.iscomplexobj(t) else float

    def __call__(self, x, t):
        env, batch = self._env(x, t)
        return self._eval_nodes(self._nodes, env, batch, self._dtype(x, t))

    def derivatives(self, x, t):
        env, batch = self._env(x, t)
        n = np.shape(x)[-1]
        names = ("t",) + ("x", "y", "z")[:n]
        out = np.empty((n + 1,) + batch + self.shape, dtype=self._dtype(x, t))
        for r, v in enumerate(names):
            out[r] = self._eval_nodes(self._deriv_nodes(v), env, batch, out.dtype)
        return out

    def __repr__(self):
        return f"ExpressionField({self.sources.tolist()!r})"


class ScaledField(Field):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.shape = base.shape
        self.constant = base.constant
        self.time_dependent = base.time_dependent
        self.bounds = base.bounds

    def __call__(self, x, t):
        return self.factor * self.base(x, t)

    def derivatives(self, x, t):
        return self.factor * self.base.derivatives(x, t)


class CallableField(Field):
    """Wrap a python callable ``fn(x, t)``; derivatives by 4th-order central differences."""

    def __init__(self, fn, shape=(), time_dependent=True, jac=None, step=1e-4):
        self.fn = fn
        self.shape = tuple(shape)
        self.time_dependent = time_dependent
        self.jac = jac
        self.step = step

    def __call__(self, x, t):
        return np.asarray(self.fn(np.asarray(x, dtype=float), t), dtype=float)

    def derivatives(self, x, t):
        if self.jac is not None:
            return np.asarray(self.jac(x, t), dtype=float)
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        h = self.step
        out = []
        if self.time_dependent:
            out.append(_central4(lambda s: self(x, t + s), h))
        else:
            out.append(np.zeros(x.shape[:-1] + self.shape))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            out.append(_central4(lambda s, e=e: self(x + s * e, t), h))
        return np.stack(out)


def _central4(f, h):
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


class GridField(Field):
    """Regular-grid samples, bilinear in space and linear in time.

    ``values`` has shape ``(nt, nx, ny, *shape)``. Spatial derivatives use
    4th-order central differences with a step of a quarter cell, time
    derivatives 2nd-order central differences.
    """

    def __init__(self, xs, ys, ts, values):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        self.shape = values.shape[3:]
        self.time_dependent = self.ts.size > 1
        self.bounds = (
            np.array([self.xs[0], self.ys[0]]),
            np.array([self.xs[-1], self.ys[-1]]),
        )
        flat = values.reshape(values.shape[:3] + (-1,))
        if self.time_dependent:
            self._interp = RegularGridInterpolator(
                (self.ts, self.xs, self.ys), flat, bounds_error=False, fill_value=None
            )
        else:
            self._interp = RegularGridInterpolator(
                (self.xs, self.ys), flat[0], bounds_error=False, fill_value=None
            )
        self.hx = 0.25 * min(np.diff(self.xs).min(), np.diff(self.ys).min())
        self.ht = 0.5 * np.diff(self.ts).min() if self.time_dependent else 0.0

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        pts = x.reshape(-1, 2)
        if self.time_dependent:
            tt = np.broadcast_to(np.asarray(t, dtype=float), batch).reshape(-1, 1)
            tt = np.clip(tt, self.ts[0], self.ts[-1])
            pts = np.hstack([tt, pts])
        return self._interp(pts).reshape(batch + self.shape)

    def derivatives(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.time_dependent:
            h = self.ht
            dt = (self(x, t + h) - self(x, t - h)) / (2 * h)
        else:
            dt = np.zeros(x.shape[:-1] + self.shape)
        out = [dt]
        for k in range(2):
            e = np.zeros(2)
            e[k] = 1.0
            out.append(_central4(lambda s, e=e: self(x + s * e, t), self.hx))
        return np.stack(out)

    @classmethod
    def from_wind_csv(cls, path):
        """Load a wind table with header ``x,y,t,Wx,Wy`` on a full regular grid."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["x", "y", "t", "Wx", "Wy"]:
                raise ValidationError([(str(path), f"expected header x,y,t,Wx,Wy, got {','.join(header)}")])
            rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        xs, ys, ts = (np.unique(rows[:, k]) for k in range(3))
        if len(rows) != xs.size * ys.size * ts.size or xs.size < 2 or ys.size < 2:
            raise ValidationError([(str(path), "wind samples do not form a full regular x,y,t grid")])
        ix = np.searchsorted(xs, rows[:, 0])
        iy = np.searchsorted(ys, rows[:, 1])
        it = np.searchsorted(ts, rows[:, 2])
        values = np.full((ts.size, xs.size, ys.size, 2), np.nan)
        values[it, ix, iy] = rows[:, 3:5]
        if np.isnan(values).any():
            raise ValidationError([(str(path), "duplicate or missing grid samples")])
        return cls(xs, ys, ts, values)


def as_field(obj, shape=None) -> Field:
    """Coerce numbers, arrays, expression strings or callables into a Field."""
    if isinstance(obj, Field):
        return obj
    if callable(obj):
        return CallableField(obj, shape or ())
    arr = np.asarray(obj, dtype=object)
    if any(isinstance(v, str) for v in arr.flat):
        f = ExpressionField(arr)
        if f.constant:
            return ConstantField(f(np.zeros(2), 0.0))
        return f
    return ConstantField(np.asarray(obj, dtype=float))
