"""Navigation queries on top of the wavefront engine.

* :func:`distance` -- the non-symmetric distance ``d_F(x0, y0)``: first arrival
  of a point source at ``x0``, polished by shooting;
* :func:`ball_boundary` -- boundaries of forward and backward balls;
* :func:`fastest_path` -- the time-minimising trajectory from ``x0`` to ``y0``.

Shooting works on the initial heading, parametrised by the angle on the light
cone at ``x0``. The signed cross-track miss of a trajectory at its closest
approach to the target changes sign between the two wavemap trajectories that
enclose the target, which gives a bracket.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ShootingStalled, Unreachable
from .finsler import INTERIOR, BOUNDARY, FinslerMetric, path_length
from .geodesics import IntegratorParams, integrate_batch
from .spacetime import spacetime_for
from .wavefront import InitialFront, arrival_at_points, detect_cuts, front_at, propagate

log = logging.getLogger(__name__)

STATUS_OPTIMAL = "optimal"
STATUS_UNREACHABLE = "unreachable"


@dataclass
class PathResult:
    T: float
    path: np.ndarray  # (m, n) polyline from x0 to the arrival point
    times: np.ndarray  # (m,)
    headings: np.ndarray  # engine heading angle along the path
    status: str = STATUS_OPTIMAL
    miss: float = 0.0
    initial_angle: float = float("nan")
    engine: np.ndarray = field(default=None)  # unit engine directions

    def as_dict(self):
        return {
            "T": self.T,
            "status": self.status,
            "miss": self.miss,
            "initial_angle": self.initial_angle,
            "path": self.path.tolist(),
            "times": self.times.tolist(),
            "headings": self.headings.tolist(),
        }


@dataclass
class _Probe:
    """Outcome of one shooting trajectory: closest approach to the target."""

    phi: float
    miss: float  # signed cross-track distance
    dist: float
    t: float
    k: int  # step index before the closest approach
    s: float  # fraction within the step


def _upper_bound(spec, x0, y0, t0):
    """Arrival time along the straight segment, or None when it leaves the domain."""
    x0, y0 = np.asarray(x0, float), np.asarray(y0, float)
    d = y0 - x0
    pts = x0 + np.linspace(0, 1, 33)[:, None] * d
    mem = spec.membership(pts, t0, np.broadcast_to(d, pts.shape))
    if not np.all((mem == INTERIOR) | (mem == BOUNDARY)):
        return None
    return path_length(spec, np.stack([x0, y0]), t=t0, frozen=not spec.time_dependent)


def _straight_unreachable(spec, x0, y0, t0):
    """Cheap necessary test: under a homogeneous metric only admissible directions are reachable."""
    if not spec.homogeneous:
        return False
    d = np.asarray(y0, float) - np.asarray(x0, float)
    return spec.membership(np.asarray(x0, float), t0, d) not in (INTERIOR, BOUNDARY)


def _point_wavemap(spec, x0, t_max, seeds, dt, t0=0.0, threads=None):
    params = IntegratorParams(dt=dt, t_max=t_max)
    wm = propagate(spec, InitialFront.point_source(x0, seeds), params, "outward", t0=t0, threads=threads)
    return wm, detect_cuts(wm)


def _coarse(spec, x0, y0, seeds, dt, t0, max_doublings, threads):
    """Wavemap reaching ``y0`` (or None) with the coarse arrival time and the enclosing seeds."""
    if _straight_unreachable(spec, x0, y0, t0):
        return None, np.inf, None
    ub = _upper_bound(spec, x0, y0, t0)
    horizon = 1.05 * ub + 10 * dt if ub is not None else max(np.linalg.norm(np.subtract(y0, x0)), 10 * dt)
    for _ in range(max_doublings + 1):
        horizon = dt * np.ceil(horizon / dt)
        wm, cuts = _point_wavemap(spec, x0, horizon, seeds, dt, t0, threads)
        T, pair = arrival_at_points(wm, cuts, [y0], return_seeds=True)
        if np.isfinite(T[0]):
            return (wm, cuts), float(T[0]) - t0, pair[0]
        if ub is not None:
            break  # the straight line already bounds the arrival time
        horizon *= 2
    return None, np.inf, None


def _hermite(p0, p1, v0, v1, h, s):
    s = np.asarray(s)[..., None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1


def _hermite_d(p0, p1, v0, v1, h, s):
    s = np.asarray(s)[..., None]
    return ((6 * s**2 - 6 * s) * p0 + (3 * s**2 - 4 * s + 1) * h * v0 + (-6 * s**2 + 6 * s) * p1 + (3 * s**2 - 2 * s) * h * v1) / h


def _closest(T, X, V, end, y0):
    """Closest approach of one sampled trajectory to ``y0`` (Hermite-refined)."""
    seg = X[: end + 1]
    d = np.linalg.norm(seg - y0, axis=1)
    k = int(np.argmin(d))
    best = (d[k], k, 0.0)
    h = T[1] - T[0]
    s_grid = np.linspace(0, 1, 65)
    for j in (k - 1, k):
        if j < 0 or j + 1 > end:
            continue
        p0, p1, v0, v1 = X[j], X[j + 1], V[j], V[j + 1]
        pts = _hermite(p0, p1, v0, v1, h, s_grid)
        i = int(np.argmin(np.linalg.norm(pts - y0, axis=1)))
        s = s_grid[i]
        for _ in range(8):  # Newton on (p(s) - y0) . p'(s) = 0
            p = _hermite(p0, p1, v0, v1, h, s)
            dp = _hermite_d(p0, p1, v0, v1, h, s) * h
            f = (p - y0) @ dp
            ds = 1e-7
            fp = ((_hermite(p0, p1, v0, v1, h, s + ds) - y0) @ (_hermite_d(p0, p1, v0, v1, h, s + ds) * h) - f) / ds
            if fp == 0:
                break
            s_new = float(np.clip(s - f / fp, 0.0, 1.0))
            if abs(s_new - s) < 1e-15:
                s = s_new
                break
            s = s_new
        dist = float(np.linalg.norm(_hermite(p0, p1, v0, v1, h, s) - y0))
        if dist < best[0]:
            best = (dist, j, s)
    dist, j, s = best
    if j + 1 > end:
        p, v = X[j], V[j]
    else:
        p = _hermite(X[j], X[j + 1], V[j], V[j + 1], h, s)
        v = _hermite_d(X[j], X[j + 1], V[j], V[j + 1], h, s)
    r = p - y0
    miss = (r[0] * v[1] - r[1] * v[0]) / np.linalg.norm(v)
    return float(miss), float(dist), float(T[j] + s * h), j, s


def _probe(st, x0, y0, phis, t0, horizon, dt):
    phis = np.atleast_1d(np.asarray(phis, float))
    X0 = np.broadcast_to(np.asarray(x0, float), (phis.size, 2))
    V0 = st.cone_point(t0, X0, phis)
    ok = np.all(np.isfinite(V0), axis=1)
    out = [None] * phis.size
    if not np.any(ok):
        return out, None
    b = integrate_batch(st, t0, X0[ok], V0[ok], IntegratorParams(dt=dt, t_max=horizon, renormalize_null=True))
    for slot, i in enumerate(np.flatnonzero(ok)):
        miss, dist, t, k, s = _closest(b.t, b.x[:, slot], b.xdot[:, slot], int(b.end[slot]), y0)
        out[i] = _Probe(float(phis[i]), miss, dist, t, k, s)
    return out, (b, np.flatnonzero(ok))


def _shoot(st, x0, y0, lo, hi, t0, horizon, dt, tol, samples=6, max_iter=12):
    """Refine the heading bracket [lo, hi] until the trajectory passes within ``tol`` of ``y0``."""
    probes, _ = _probe(st, x0, y0, [lo, hi], t0, horizon, dt)
    best = min((p for p in probes if p is not None), key=lambda p: p.dist, default=None)
    if any(p is None for p in probes) or np.sign(probes[0].miss) == np.sign(probes[1].miss):
        raise ShootingStalled("initial headings do not bracket the target", best)
    a, b = probes
    for _ in range(max_iter):
        if min(a.dist, b.dist) < tol:
            break
        # regula falsi estimate plus uniform interior samples
        width = b.phi - a.phi
        guess = a.phi + a.miss / (a.miss - b.miss) * width
        near = guess + width * np.outer([-1.0, 1.0], 10.0 ** -np.arange(1, 7)).ravel()
        phis = np.concatenate([np.linspace(a.phi, b.phi, samples + 2)[1:-1], [guess], near])
        lo_, hi_ = min(a.phi, b.phi), max(a.phi, b.phi)
        phis = phis[(phis > lo_) & (phis < hi_)]
        phis = np.unique(phis) if width > 0 else np.unique(phis)[::-1]
        probes, _ = _probe(st, x0, y0, phis, t0, horizon, dt)
        seq = [a] + [p for p in probes if p is not None] + [b]
        cand = min(seq, key=lambda p: p.dist)
        if cand.dist < best.dist:
            best = cand
        for p, q in zip(seq[:-1], seq[1:]):
            if np.sign(p.miss) != np.sign(q.miss) or p.miss == 0 or q.miss == 0:
                a, b = p, q
                break
        else:
            raise ShootingStalled("lost the bracket while refining the heading", best)
    best = min((a, b), key=lambda p: p.dist)
    if best.dist >= tol:
        raise ShootingStalled(f"heading search stalled at miss {best.dist:.3g}", best)
    return best


def _engine_dirs(st, t, X, V):
    """Unit engine directions ``v - c`` where ``c`` is the centre of the indicatrix."""
    if hasattr(st, "_centre_radius"):
        c, _, _ = st._centre_radius(t, X)
        u = V - c
    else:
        u = V
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def _path_from_probe(st, x0, y0, probe, t0, dt):
    horizon = dt * (probe.k + 1)
    V0 = st.cone_point(t0, np.asarray(x0, float)[None], np.array([probe.phi]))
    b = integrate_batch(st, t0, np.asarray(x0, float)[None], V0, IntegratorParams(dt=dt, t_max=horizon))
    X, V = b.x[:, 0], b.xdot[:, 0]
    k = probe.k
    h = dt
    p_end = _hermite(X[k], X[k + 1], V[k], V[k + 1], h, probe.s) if probe.s > 0 else X[k]
    v_end = _hermite_d(X[k], X[k + 1], V[k], V[k + 1], h, probe.s) if probe.s > 0 else V[k]
    path = np.vstack([X[: k + 1], p_end])
    vel = np.vstack([V[: k + 1], v_end])
    times = np.concatenate([b.t[: k + 1], [probe.t]])
    if probe.s == 0:
        path, vel, times = path[:-1], vel[:-1], times[:-1]
    eng = np.array([_engine_dirs(st, ti, xi[None], vi[None])[0] for ti, xi, vi in zip(times, path, vel)])
    return path, times, eng


def fastest_path(spec, x0, y0, tol=1e-9, seeds=256, dt=1e-3, t0=0.0, max_doublings=4, threads=None) -> PathResult:
    """Time-minimising trajectory from ``x0`` to ``y0``.

    Raises Unreachable when the target is outside the reachable set before
    the search horizon, ShootingStalled when the heading cannot be bracketed.
    """
    x0, y0 = np.asarray(x0, float), np.asarray(y0, float)
    st = spacetime_for(spec)
    coarse, T_w, pair = _coarse(spec, x0, y0, seeds, dt, t0, max_doublings, threads)
    if coarse is None:
        raise Unreachable(f"target {y0.tolist()} is not reachable from {x0.tolist()}")
    wm, _ = coarse
    horizon = dt * np.ceil((T_w + 20 * dt) / dt)
    ang = st.cone_angle(t0, np.broadcast_to(x0, wm.xdot[0].shape), wm.xdot[0])
    i, j = (int(v) for v in pair)
    lo, hi = float(ang[i]), float(ang[j])
    if hi < lo - np.pi:
        hi += 2 * np.pi
    elif hi > lo + np.pi:
        hi -= 2 * np.pi
    try:
        best = _shoot(st, x0, y0, lo, hi, t0, horizon, dt, tol)
    except ShootingStalled:
        # widen to the neighbouring seeds once
        width = abs(hi - lo)
        a, b = min(lo, hi) - 2 * width, max(lo, hi) + 2 * width
        best = _shoot(st, x0, y0, a, b, t0, horizon, dt, tol)
    path, times, eng = _path_from_probe(st, x0, y0, best, t0, dt)
    T = best.t - t0
    headings = np.arctan2(eng[:, 1], eng[:, 0])
    if abs(T - T_w) > 2 * dt + 1e-9:
        log.info("polished arrival %.9g differs from the wavemap estimate %.9g", T, T_w)
    return PathResult(float(T), path, times, headings, STATUS_OPTIMAL, best.dist, best.phi, eng)


def distance(spec, x0, y0, polish=True, tol=1e-9, seeds=256, dt=1e-3, t0=0.0, max_doublings=4, threads=None, backward=False):
    """``d_F(x0, y0)`` (or ``d_F(y0, x0)`` with ``backward``); ``inf`` when unreachable."""
    x0, y0 = np.asarray(x0, float), np.asarray(y0, float)
    if backward:
        spec = reverse(spec)
    if np.array_equal(x0, y0):
        return 0.0
    if not polish:
        coarse, T_w, _ = _coarse(spec, x0, y0, seeds, dt, t0, max_doublings, threads)
        return T_w
    try:
        return fastest_path(spec, x0, y0, tol, seeds, dt, t0, max_doublings, threads).T
    except Unreachable:
        return float("inf")
    except ShootingStalled as exc:
        if exc.best is not None:
            log.warning("shooting stalled, returning best candidate (miss %.3g)", exc.best.dist)
        coarse, T_w, _ = _coarse(spec, x0, y0, seeds, dt, t0, max_doublings, threads)
        return T_w


def reverse(spec):
    """Reverse metric ``v -> F(-v)`` (balls and distances swap direction)."""
    if isinstance(spec, FinslerMetric):
        rev = spec.reversed()
        if spec.box is not None:
            rev = copy.copy(rev) if rev is spec else rev
            rev.box = spec.box
        return rev
    raise TypeError("reverse metric needs a Finsler metric specification")


def ball_boundary(spec, x0, r, side="forward", seeds=256, dt=1e-3, t0=0.0, threads=None):
    """Boundary of ``B+(x0, r)`` (``side='forward'``) or ``B-(x0, r)`` as a polyline.

    Closed fronts are returned with the first point repeated at the end; a
    slice broken by cuts is returned as a list of polylines.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if side in ("backward", "bwd"):
        spec = reverse(spec)
    elif side not in ("forward", "fwd"):
        raise ValueError("side must be forward or backward")
    t_max = dt * np.ceil(r / dt - 1e-9)
    wm, cuts = _point_wavemap(spec, x0, t_max, seeds, dt, t0, threads)
    sl = front_at(wm, cuts, t0 + r)
    lines = sl.polylines()
    return lines[0] if len(lines) == 1 else lines
