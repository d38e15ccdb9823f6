"""Independent reference computations used by the test-suite.

Nothing here imports the package under test: each oracle is a direct,
brute-force evaluation of the quantity it checks.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def resultant_speed_time(W, d):
    """Time to travel along the unit direction ``d`` (distance |d|) at unit engine speed in constant wind W.

    Maximises |u + W| over unit engine headings u with u + W parallel to d.
    """
    W = np.asarray(W, float)
    d = np.asarray(d, float)
    L = np.linalg.norm(d)
    e = d / L
    # u = s e - W with |u| = 1  ->  s^2 - 2 s <e, W> + |W|^2 - 1 = 0
    b = e @ W
    disc = b * b - (W @ W - 1.0)
    if disc < 0:
        return np.inf
    s = b + np.sqrt(disc)
    return L / s if s > 0 else np.inf


def fd_hessian(f, v, h=1e-5):
    """Hessian of a scalar function by central differences, one Richardson level."""

    def H(step):
        n = len(v)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.eye(n)[i] * step
                ej = np.eye(n)[j] * step
                out[i, j] = (f(v + ei + ej) - f(v + ei - ej) - f(v - ei + ej) + f(v - ei - ej)) / (4 * step * step)
        return out

    return (4 * H(h / 2) - H(h)) / 3


def hausdorff(A, B):
    """Symmetric Hausdorff distance between two point clouds."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    return max(cKDTree(B).query(A)[0].max(), cKDTree(A).query(B)[0].max())


def polyline_distance(pts, poly, chunk=4096):
    """Exact distance from each point to the nearest segment of a polyline."""
    pts = np.atleast_2d(np.asarray(pts, float))
    poly = np.asarray(poly, float)
    a, d = poly[:-1], np.diff(poly, axis=0)
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        p = pts[i : i + chunk, None, :]
        u = np.clip(np.einsum("pij,ij->pi", p - a, d) / dd, 0.0, 1.0)
        out[i : i + chunk] = np.linalg.norm(p - (a + u[..., None] * d), axis=-1).min(axis=1)
    return out


def hausdorff_to_curve(poly, curve):
    """Hausdorff distance between a polyline and a densely sampled reference curve."""
    one = cKDTree(np.asarray(curve, float)).query(dense_polyline(poly, 50))[0].max()
    return max(one, polyline_distance(curve, poly).max())


def dense_polyline(P, per_segment=20):
    """Points sampled along a polyline (for Hausdorff checks against curves)."""
    P = np.asarray(P, float)
    s = np.linspace(0, 1, per_segment, endpoint=False)
    seg = P[:-1, None, :] + s[None, :, None] * (P[1:] - P[:-1])[:, None, :]
    return np.concatenate([seg.reshape(-1, P.shape[1]), P[-1:]])


def point_in_polygon(poly, pts):
    """Even-odd rule; ``poly`` is an (m, 2) closed or open vertex list."""
    poly = np.asarray(poly, float)
    pts = np.atleast_2d(np.asarray(pts, float))
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    a = poly
    b = np.roll(poly, -1, axis=0)
    cond = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return np.sum(cond & (x < xc), axis=1) % 2 == 1


def shear_dp_arrival(targets, k=0.2, headings=720, steps=2000, t_end=1.6, ylim=(-0.5, 0.8), dy=None, t_start=0.02):
    """Brute-force minimum time from the origin to each target under W = (k y, 0), unit engine speed.

    The wind does not depend on x, so the reachable set at time t is described
    by ``P_t(y)``, the largest x reachable at height y. Dynamic programming
    over piecewise-constant headings (``headings`` uniform angles, ``steps``
    time steps up to ``t_end``) gives

        P_{t+dt}(y) = max_phi  P_t(y - dt sin phi) + dt cos phi + k dt (2 y - dt sin phi) / 2,

    the exact x-gain of a straight engine leg in the shear. The set is
    seeded at ``t_start`` by the straight-leg reachable set. The arrival time
    at (X, Y) is the first time with P_t(Y) >= X, linearly interpolated
    between steps. The reachable set grows monotonically (|W| < 1 on the
    strip), so this first passage is the minimum time.
    """
    targets = np.atleast_2d(np.asarray(targets, float))
    dt = (t_end - t_start) / steps
    dy = dt if dy is None else dy  # dy <= dt lets the strip edge advance every step
    ys = ylim[0] + dy * np.arange(int(np.ceil((ylim[1] - ylim[0]) / dy)) + 1)
    ny = len(ys)
    tau = t_start
    with np.errstate(invalid="ignore"):
        P = np.where(np.abs(ys) <= tau, np.sqrt(np.maximum(tau * tau - ys * ys, 0.0)) + 0.5 * k * ys * tau, -np.inf)
    phi = 2 * np.pi * np.arange(headings) / headings
    sn, cs = np.sin(phi), np.cos(phi)
    # the departure height y - dt sin(phi) is a fixed fractional shift of the grid
    u = -dt * sn / dy
    u = np.where(np.abs(u - np.round(u)) < 1e-9, np.round(u), u)  # exact cell shifts stay exact
    base = np.floor(u).astype(int)
    s = (u - base)[:, None]
    w = np.stack([-s * (s - 1) * (s - 2) / 6, (s + 1) * (s - 1) * (s - 2) / 2, -(s + 1) * s * (s - 2) / 2, (s + 1) * s * (s - 1) / 6])
    j = np.arange(ny)[None, :]
    idx = np.stack([j + base[:, None] + m for m in (-1, 0, 1, 2)])  # (4, headings, ny)
    inside = np.all((idx >= 0) & (idx < ny), axis=0)
    idx = np.clip(idx, 0, ny - 1)
    gain = dt * cs[:, None] + 0.5 * k * dt * (2 * ys[None, :] - dt * sn[:, None])
    out = np.full(len(targets), np.inf)
    prev = np.array([_interp_lin(P, ys, ty) for ty in targets[:, 1]])
    for step in range(1, steps + 1):
        G = P[idx]
        ok = inside & np.all(np.isfinite(G), axis=0)
        Gf = np.where(np.isfinite(G), G, 0.0)
        cubic = np.einsum("mhy,mhy->hy", w, Gf)
        # at the edge of the reachable strip fall back to linear interpolation
        lin_ok = inside & np.isfinite(G[1]) & (np.isfinite(G[2]) | (s == 0))
        linear = (1 - s) * Gf[1] + s * Gf[2]
        val = np.where(ok, cubic, np.where(lin_ok, linear, -np.inf)) + gain
        P = np.max(val, axis=0)
        t = t_start + step * dt
        cur = np.array([_interp_lin(P, ys, ty) for ty in targets[:, 1]])
        for q, tx in enumerate(targets[:, 0]):
            if np.isinf(out[q]) and cur[q] >= tx:
                a = prev[q]
                frac = 1.0 if not np.isfinite(a) else (tx - a) / (cur[q] - a)
                out[q] = t - dt + frac * dt
        prev = cur
        if np.all(np.isfinite(out)):
            break
    return out


def _interp_lin(P, ys, y):
    i = int(np.clip(np.searchsorted(ys, y) - 1, 0, len(ys) - 2))
    s = (y - ys[i]) / (ys[i + 1] - ys[i])
    return (1 - s) * P[i] + s * P[i + 1]
