"""Lightlike pregeodesics parametrised by coordinate time, and Finsler geodesics.

A future lightlike curve ``f(t) = (t, x(t))`` of the spacetime metric is a
pregeodesic iff its spatial part solves

    xddot^k = sum_ij (-gamma^k_ij + gamma^0_ij xdot^k) xdot^i xdot^j,

with ``xdot^0 = 1`` and ``gamma`` the formal Christoffel symbols of ``g^G`` at
the velocity. Integration is classical RK4 with a fixed step, batched over
seeds, with optional radial reprojection of ``xdot`` onto the light cone after
every step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousSide, DomainExit, NoSolution, StepRejected
from .finsler import FinslerMetric, INTERIOR
from .spacetime import SpacetimeMetric, spacetime_for

STATUS_OK, STATUS_EXIT, STATUS_REJECTED = "ok", "exit", "rejected"


@dataclass
class TrajectoryState:
    t: float
    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.xdot = np.asarray(self.xdot, dtype=float)


@dataclass
class IntegratorParams:
    dt: float = 1e-3
    t_max: float = 1.0
    renormalize_null: bool = True
    drift_tolerance: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0 or not self.t_max > 0:
            raise ValueError("dt and t_max must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class Trajectory:
    """Samples of one trajectory on the common time grid.

    ``x`` and ``xdot`` hold NaN after ``end`` (the last valid index).
    """

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    end: int
    status: str = STATUS_OK
    exit_time: float = np.inf
    seed: int = 0

    @property
    def valid(self):
        return slice(0, self.end + 1)


@dataclass
class Batch:
    """Trajectories of several seeds sharing one time grid (axis order: step, seed, coord)."""

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    end: np.ndarray
    status: np.ndarray
    exit_time: np.ndarray
    drift: np.ndarray = field(default=None)

    def trajectory(self, i) -> Trajectory:
        return Trajectory(self.t, self.x[:, i], self.xdot[:, i], int(self.end[i]),
                          str(self.status[i]), float(self.exit_time[i]), i)


def _inside_box(bounds, x):
    if bounds is None:
        return np.ones(x.shape[:-1], dtype=bool)
    lo, hi = bounds
    return np.all((x >= lo) & (x <= hi), axis=-1)


def integrate_batch(metric: SpacetimeMetric, t0, x0, v0, params: IntegratorParams) -> Batch:
    """RK4 for many seeds at once; seeds that exit or blow up are frozen."""
    x0 = np.atleast_2d(np.asarray(x0, float))
    v0 = np.atleast_2d(np.asarray(v0, float))
    nseed, n = x0.shape
    m = params.steps
    dt = params.dt
    T = t0 + dt * np.arange(m + 1)
    X = np.full((m + 1, nseed, n), np.nan)
    V = np.full((m + 1, nseed, n), np.nan)
    drift = np.full((m + 1, nseed), np.nan)
    X[0], V[0] = x0, v0
    end = np.zeros(nseed, dtype=int)
    status = np.full(nseed, STATUS_OK, dtype=object)
    exit_time = np.full(nseed, np.inf)
    alive = _inside_box(metric.bounds, x0) & metric.admissible(t0, x0, v0)
    status[~alive] = STATUS_EXIT
    exit_time[~alive] = t0
    drift[0, alive] = np.abs(metric.G(t0, x0[alive], 1.0, v0[alive]))
    bounds = metric.bounds
    homogeneous = metric.homogeneous
    if homogeneous:
        return _straight_batch(metric, T, X, V, drift, end, status, exit_time, alive, params)

    def acc(t, x, v):
        if homogeneous:
            return np.zeros_like(v)
        return metric.acceleration(t, x, v)

    for k in range(m):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        t = T[k]
        x, v = X[k, idx], V[k, idx]
        with np.errstate(all="ignore"):
            a1 = acc(t, x, v)
            x2, v2 = x + 0.5 * dt * v, v + 0.5 * dt * a1
            a2 = acc(t + 0.5 * dt, x2, v2)
            x3, v3 = x + 0.5 * dt * v2, v + 0.5 * dt * a2
            a3 = acc(t + 0.5 * dt, x3, v3)
            x4, v4 = x + dt * v3, v + dt * a3
            a4 = acc(t + dt, x4, v4)
            xn = x + dt / 6 * (v + 2 * v2 + 2 * v3 + v4)
            vn = v + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        finite = np.all(np.isfinite(xn), axis=-1) & np.all(np.isfinite(vn), axis=-1)
        ok = finite & _inside_box(bounds, np.where(finite[:, None], xn, x))
        if np.any(ok):
            ok[ok] &= metric.admissible(T[k + 1], xn[ok], vn[ok])
        if params.renormalize_null and np.any(ok):
            with np.errstate(all="ignore"):
                s = metric.null_scale(T[k + 1], xn[ok], vn[ok])
            good = np.isfinite(s) & (s > 0)
            sub = np.flatnonzero(ok)
            vn[sub[good]] *= s[good, None]
            ok[sub[~good]] = False
        dead = idx[~ok]
        status[dead] = np.where(finite[~ok], STATUS_EXIT, STATUS_REJECTED)
        exit_time[dead] = T[k] + dt  # left the domain during this step
        alive[dead] = False
        live = idx[ok]
        X[k + 1, live], V[k + 1, live] = xn[ok], vn[ok]
        end[live] = k + 1
        if live.size:
            drift[k + 1, live] = np.abs(metric.G(T[k + 1], xn[ok], 1.0, vn[ok]))
    return Batch(T, X, V, end, status, exit_time, drift)


def _straight_batch(metric, T, X, V, drift, end, status, exit_time, alive, params):
    """Homogeneous media: every pregeodesic is the straight line x0 + (t - t0) v0."""
    idx = np.flatnonzero(alive)
    x0, v0 = X[0, idx], V[0, idx]
    if params.renormalize_null and idx.size:
        v0 = v0 * metric.null_scale(T[0], x0, v0)[:, None]
    rel = T - T[0]
    Xs = x0[None] + rel[:, None, None] * v0[None]
    inside = _inside_box(metric.bounds, Xs)
    inside[0] = True
    bad = ~inside
    first_bad = np.where(bad.any(axis=0), bad.argmax(axis=0), len(T))
    for slot, i in enumerate(idx):
        k = first_bad[slot]
        X[1:k, i] = Xs[1:k, slot]
        V[:k, i] = v0[slot]
        end[i] = k - 1
        if k < len(T):
            status[i] = STATUS_EXIT
            exit_time[i] = T[k]
    if idx.size:
        g = np.abs(metric.G(T[0], x0, 1.0, v0))
        drift[:, idx] = np.where(np.arange(len(T))[:, None] <= end[idx][None, :], g[None, :], np.nan)
    return Batch(T, X, V, end, status, exit_time, drift)


def integrate_pregeodesic(metric, init: TrajectoryState, params: IntegratorParams) -> Trajectory:
    """Integrate one lightlike pregeodesic from ``init``.

    Raises DomainExit / StepRejected when the trajectory stops early; the
    partial trajectory is attached to the exception as ``trajectory``.
    """
    metric = spacetime_for(metric)
    b = integrate_batch(metric, init.t, init.x[None], init.xdot[None], params)
    traj = b.trajectory(0)
    if traj.status != STATUS_OK:
        cls = DomainExit if traj.status == STATUS_EXIT else StepRejected
        err = cls(f"trajectory stopped at t={traj.exit_time:.6g} ({traj.status})")
        err.trajectory = traj
        raise err
    return traj


# -- G-orthogonal lightlike initial data -------------------------------------------


def _orth_residual(metric, t, x, v, e):
    """g^G_{(1,v)}((1, v), (0, e)), batched over v."""
    v = np.asarray(v, float)
    g = metric.tensor(t, x, np.ones(v.shape[:-1]), v)
    U = np.concatenate([np.ones(v.shape[:-1] + (1,)), v], axis=-1)
    E = np.concatenate([[0.0], e])
    return np.einsum("...ij,...i,j->...", g, U, E)


def orthogonal_directions_rootfind(metric: SpacetimeMetric, t, x, e, samples=720, tol=1e-15):
    """All lightlike (1, v) that are g^G-orthogonal to (0, e), by bisection on the cone angle."""
    x = np.asarray(x, float)
    e = np.asarray(e, float)
    # periodic grid, offset so that symmetric roots do not land on nodes
    phi = 2 * np.pi * (np.arange(samples) + 0.318309886) / samples - np.pi
    v = metric.cone_point(t, np.broadcast_to(x, (phi.size, x.size)), phi)
    ok = np.all(np.isfinite(v), axis=-1)
    r = np.full(phi.size, np.nan)
    if np.any(ok):
        r[ok] = _orth_residual(metric, t, np.broadcast_to(x, v[ok].shape), v[ok], e)
    roots = []
    for i in range(samples):
        j = (i + 1) % samples
        ra, rb = r[i], r[j]
        if not (np.isfinite(ra) and np.isfinite(rb)):
            continue
        if ra == 0.0:
            roots.append(metric.cone_point(t, x, phi[i]))
            continue
        if rb == 0.0 or np.sign(ra) == np.sign(rb):
            continue
        a = phi[i]
        b = phi[j] + (2 * np.pi if j == 0 else 0.0)
        for _ in range(80):
            mid = 0.5 * (a + b)
            rm = _orth_residual(metric, t, x, metric.cone_point(t, x, mid), e)
            if rm == 0.0:
                a = b = mid
                break
            if np.sign(rm) == np.sign(ra):
                a, ra = mid, rm
            else:
                b = mid
            if b - a < tol:
                break
        roots.append(metric.cone_point(t, x, 0.5 * (a + b)))
    return roots


def _pick_side(cands, normal, side):
    if not cands:
        raise NoSolution("no lightlike G-orthogonal direction in the conic domain")
    comps = np.array([c @ normal for c in cands])
    if len(cands) == 1:
        c = comps[0]
        if abs(c) < 1e-10:
            raise AmbiguousSide("orthogonal direction is tangent to the front")
        if (c > 0) != (side == "outward"):
            raise NoSolution(f"no {side} lightlike G-orthogonal direction")
        return cands[0]
    order = np.argsort(comps)
    lo, hi = cands[order[0]], cands[order[-1]]
    if comps[order[-1]] - comps[order[0]] < 1e-10:
        raise AmbiguousSide("both orthogonal directions have the same normal component")
    return hi if side == "outward" else lo


def orthogonal_velocity(metric: SpacetimeMetric, t, x, e, normal, side="outward", method="auto"):
    """Spatial velocity of the lightlike G-orthogonal direction on ``side``.

    ``normal`` is the outward normal of the front; of the two solutions the one
    with the larger component along it is outward.
    """
    if side not in ("outward", "inward"):
        raise ValueError("side must be 'outward' or 'inward'")
    cands = metric.orthogonal_closed_form(t, x, e) if method != "rootfind" else None
    if cands is None:
        cands = orthogonal_directions_rootfind(metric, t, x, e)
    return _pick_side(list(cands), np.asarray(normal, float), side)


def lightlike_orthogonal_init(metric, front, s, side="outward", t0=0.0, method="auto") -> TrajectoryState:
    """Initial state leaving the front point ``front.point(s)`` G-orthogonally."""
    metric = spacetime_for(metric)
    x = np.asarray(front.point(s), float)
    e = np.asarray(front.tangent(s), float)
    nrm = np.asarray(front.normal(s), float)
    v = orthogonal_velocity(metric, t0, x, e, nrm, side, method)
    return TrajectoryState(t0, x, v)


def orthogonal_velocities(metric: SpacetimeMetric, t, X, E, N, side="outward"):
    """Vectorised :func:`orthogonal_velocity` for quadratic cones; per-seed fallback otherwise.

    Returns ``(V, failed)`` where ``failed`` holds an error message per seed or None.
    """
    X, E, N = (np.asarray(a, float) for a in (X, E, N))
    V = np.full(X.shape, np.nan)
    failed = [None] * len(X)
    if metric.kind == "sstk":
        Lam, om, g0 = metric._cone(t, X)
        sharp = np.linalg.solve(g0, om[..., None])[..., 0]
        c = -sharp
        R = np.sqrt(Lam + np.einsum("...i,...i->...", om, sharp))
        J = np.stack([E[:, 1], -E[:, 0]], axis=-1)
        nu = np.linalg.solve(g0, J[..., None])[..., 0]
        nu /= np.sqrt(np.einsum("...i,...ij,...j->...", nu, g0, nu))[:, None]
        vp, vm = c + R[:, None] * nu, c - R[:, None] * nu
        cp = np.einsum("ij,ij->i", vp, N)
        cm = np.einsum("ij,ij->i", vm, N)
        out = cp >= cm
        if side == "inward":
            out = ~out
        V = np.where(out[:, None], vp, vm)
        amb = np.abs(cp - cm) < 1e-10
        for i in np.flatnonzero(amb):
            failed[i] = "ambiguous side"
            V[i] = np.nan
        return V, failed
    for i in range(len(X)):
        try:
            V[i] = orthogonal_velocity(metric, t, X[i], E[i], N[i], side)
        except (NoSolution, AmbiguousSide) as exc:
            failed[i] = str(exc)
    return V, failed


# -- spatial Finsler geodesics --------------------------------------------------------


def _finsler_acc(spec: FinslerMetric, x, v):
    g, dg = spec.tensor_and_derivs(x, 0.0, v)
    D = np.moveaxis(dg[1:], 0, -3)  # [..., r, i, j] = d_r g_ij
    q = np.einsum("...irj,...i,...j->...r", D, v, v) - 0.5 * np.einsum("...rij,...i,...j->...r", D, v, v)
    return -np.linalg.solve(g, q[..., None])[..., 0]


def integrate_finsler_geodesic(spec: FinslerMetric, x0, v0, params: IntegratorParams, renormalize=None):
    """Unit-speed geodesic of a time-independent Finsler metric (RK4, fixed step).

    Returns a Trajectory whose parameter is F-arclength.
    """
    if spec.time_dependent:
        raise ValueError("Finsler geodesics need a time-independent metric")
    x = np.asarray(x0, float).copy()
    v = np.asarray(v0, float).copy()
    F0 = float(spec.cost(x, 0.0, v))
    if abs(F0 - 1.0) > 1e-8:
        raise ValueError(f"initial velocity must have unit cost, got F(v0) = {F0:.12g}")
    renormalize = params.renormalize_null if renormalize is None else renormalize
    m, dt = params.steps, params.dt
    T = dt * np.arange(m + 1)
    X = np.full((m + 1, x.size), np.nan)
    V = np.full((m + 1, x.size), np.nan)
    X[0], V[0] = x, v
    bounds = spec.bounds
    status, end, t_exit = STATUS_OK, m, np.inf

    def acc(x_, v_):
        return np.zeros_like(v_) if spec.homogeneous else _finsler_acc(spec, x_, v_)

    for k in range(m):
        with np.errstate(all="ignore"):
            a1 = acc(x, v)
            v2 = v + 0.5 * dt * a1
            a2 = acc(x + 0.5 * dt * v, v2)
            v3 = v + 0.5 * dt * a2
            a3 = acc(x + 0.5 * dt * v2, v3)
            v4 = v + dt * a3
            a4 = acc(x + dt * v3, v4)
            xn = x + dt / 6 * (v + 2 * v2 + 2 * v3 + v4)
            vn = v + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(vn))):
            status, end, t_exit = STATUS_REJECTED, k, T[k] + dt
            break
        p = spec.params(xn, 0.0)
        if not _inside_box(bounds, xn) or spec._membership(p, vn) != INTERIOR:
            status, end, t_exit = STATUS_EXIT, k, T[k] + dt
            break
        if renormalize:
            vn = vn / spec._cost(p, vn, "Z")
        x, v = xn, vn
        X[k + 1], V[k + 1] = x, v
    traj = Trajectory(T, X, V, end, status, t_exit)
    if status != STATUS_OK:
        cls = DomainExit if status == STATUS_EXIT else StepRejected
        err = cls(f"geodesic stopped at s={t_exit:.6g}")
        err.trajectory = traj
        raise err
    return traj


# -- diagnostics and export ---------------------------------------------------------------


def conservation_report(trajectory, metric) -> dict:
    """Null-constraint monitor: ``|G(1, xdot)|`` at every stored sample."""
    metric = spacetime_for(metric)
    if isinstance(trajectory, Batch):
        t, X, V = trajectory.t, trajectory.x, trajectory.xdot
    else:
        t, X, V = trajectory.t, trajectory.x[:, None], trajectory.xdot[:, None]
    ok = np.all(np.isfinite(X), axis=-1) & np.all(np.isfinite(V), axis=-1)
    series = np.full(ok.shape, np.nan)
    for k in range(len(t)):
        if np.any(ok[k]):
            series[k, ok[k]] = np.abs(metric.G(t[k], X[k, ok[k]], 1.0, V[k, ok[k]]))
    per_step = np.nanmax(np.where(ok, series, -np.inf), axis=1)
    per_step[~np.any(ok, axis=1)] = np.nan
    elapsed = t - t[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(elapsed > 0, per_step / elapsed, 0.0)
    if len(t) > 1 and np.any(np.isfinite(rate[1:])):
        max_rate = float(np.nanmax(rate[1:]))
    else:
        max_rate = 0.0
    return {
        "max_abs_G": float(np.nanmax(per_step)) if np.any(ok) else 0.0,
        "max_rate": max_rate,
        "drift": per_step,
    }


def write_trajectories_csv(path, batch: Batch, fmt="{:.17g}"):
    """Rows ``seed,t,x,y[,z]`` for every valid sample, seed-major."""
    n = batch.x.shape[-1]
    header = ["seed", "t"] + ["x", "y", "z"][:n]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(batch.x.shape[1]):
            for k in range(int(batch.end[i]) + 1):
                w.writerow([i, fmt.format(batch.t[k])] + [fmt.format(c) for c in batch.x[k, i]])
