"""Front propagation by the wavemap, cut detection and front extraction.

A front S is sampled by N seeds. Every seed launches the lightlike
G-orthogonal pregeodesic on the requested side; the family ``x(t, s)`` is the
wavemap. A seed stops belonging to the wavefront at its cut instant: the first
time another trajectory (or itself) reaches the same point no later than it
does, or the first focal point (sign change of ``det[x_s | x_t]``).
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSolution, OutOfHorizon, ResolutionWarning, ValidationError
from .geodesics import STATUS_OK, IntegratorParams, integrate_batch, orthogonal_velocities
from .spacetime import SpacetimeMetric, spacetime_for

CHUNK = 128
POINT_RADIUS = 1e-6

CAUSE_HORIZON = "horizon"
CAUSE_INTERSECTION = "intersection"
CAUSE_FOCAL = "focal"
CAUSE_BOTH = "both"
CAUSE_EXIT = "exit"
CAUSE_NO_SOLUTION = "no_solution"


def thread_count():
    """Worker threads for propagation: the CPU count, capped by ``WINDFRONT_THREADS``."""
    cpus = os.cpu_count() or 1
    env = os.environ.get("WINDFRONT_THREADS", "").strip()
    if env:
        try:
            return max(1, min(cpus, int(env)))
        except ValueError:
            warnings.warn(f"ignoring non-integer WINDFRONT_THREADS={env!r}", stacklevel=2)
    return cpus


# -- initial fronts -------------------------------------------------------------


def _segments_cross(p, q, r, s, eps=1e-9):
    """Vectorised proper intersection of segments p-q and r-s.

    Returns (hit, alpha, beta) with the crossing at p + alpha (q - p) = r + beta (s - r).
    """
    d1 = q - p
    d2 = s - r
    w = r - p
    den = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = (w[..., 0] * d2[..., 1] - w[..., 1] * d2[..., 0]) / den
        beta = (w[..., 0] * d1[..., 1] - w[..., 1] * d1[..., 0]) / den
    scale = np.linalg.norm(d1, axis=-1) * np.linalg.norm(d2, axis=-1)
    hit = (np.abs(den) > eps * scale) & (alpha >= -eps) & (alpha <= 1 + eps) & (beta >= -eps) & (beta <= 1 + eps)
    return hit, np.clip(alpha, 0, 1), np.clip(beta, 0, 1)


class InitialFront:
    """Seeds on a closed or open planar curve with tangents and outward normals.

    For closed fronts the seed order is made counter-clockwise, so the outward
    normal is the tangent rotated clockwise. For open polylines "outward" is
    the right-hand side of the direction of travel.
    """

    def __init__(self, points, tangents, normals, closed=True, kind="polyline", curve=None, max_spacing=None):
        self.points = np.asarray(points, float)
        self.tangents = np.asarray(tangents, float)
        self.normals = np.asarray(normals, float)
        self.closed = closed
        self.kind = kind
        self._curve = curve  # s -> (point, tangent, normal)
        self.max_spacing = max_spacing
        self.validate()

    @property
    def n_seeds(self):
        return len(self.points)

    @property
    def spacing(self):
        pts = self.points
        d = np.diff(np.vstack([pts, pts[:1]]) if self.closed else pts, axis=0)
        return np.linalg.norm(d, axis=1)

    def validate(self):
        issues = []
        if self.n_seeds < 3:
            issues.append(("front.seeds", "need at least 3 seeds"))
        if self.max_spacing is not None and self.spacing.max() > self.max_spacing:
            issues.append(("front.seeds", f"seed spacing {self.spacing.max():.3g} exceeds {self.max_spacing:.3g}"))
        if not issues and not self.embedded():
            issues.append(("front", "front polyline self-intersects"))
        if issues:
            raise ValidationError(issues)

    def embedded(self, tol=1e-9):
        pts = self.points
        nxt = np.roll(pts, -1, axis=0)
        m = len(pts) if self.closed else len(pts) - 1
        i, j = np.triu_indices(m, k=2)
        if self.closed:
            keep = ~((i == 0) & (j == m - 1))
            i, j = i[keep], j[keep]
        if i.size == 0:
            return True
        hit, _, _ = _segments_cross(pts[i], nxt[i], pts[j], nxt[j], eps=-tol)
        return not np.any(hit)

    def seed_index(self, s):
        return int(np.floor(s * self.n_seeds + 1e-9)) % self.n_seeds

    def _at(self, s):
        if self._curve is not None:
            return self._curve(s)
        i = self.seed_index(s)
        return self.points[i], self.tangents[i], self.normals[i]

    def point(self, s):
        return self._at(s)[0]

    def tangent(self, s):
        return self._at(s)[1]

    def normal(self, s):
        return self._at(s)[2]

    # constructors
    @classmethod
    def ellipse(cls, center, semi_axes, n=256, angle=0.0, max_spacing=None, kind="ellipse"):
        a, b = (float(v) for v in semi_axes)
        c = np.asarray(center, float)
        ca, sa = np.cos(angle), np.sin(angle)
        rot = np.array([[ca, -sa], [sa, ca]])

        def curve(s):
            th = 2 * np.pi * np.asarray(s, float)
            p = np.stack([a * np.cos(th), b * np.sin(th)], axis=-1)
            e = np.stack([-a * np.sin(th), b * np.cos(th)], axis=-1)
            nrm = np.stack([b * np.cos(th), a * np.sin(th)], axis=-1)
            e = e / np.linalg.norm(e, axis=-1, keepdims=True)
            nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
            return c + p @ rot.T, e @ rot.T, nrm @ rot.T

        pts, tan, nrm = curve(np.arange(n) / n)
        return cls(pts, tan, nrm, True, kind, curve, max_spacing)

    @classmethod
    def circle(cls, center, radius, n=256, max_spacing=None):
        return cls.ellipse(center, (radius, radius), n, max_spacing=max_spacing, kind="circle")

    @classmethod
    def point_source(cls, center, n=256, radius=POINT_RADIUS):
        return cls.ellipse(center, (radius, radius), n, kind="point")

    @classmethod
    def polyline(cls, vertices, n=256, closed=True, max_spacing=None):
        """Seeds equally spaced in arclength along a polyline."""
        v = np.asarray(vertices, float)
        if closed:
            if np.allclose(v[0], v[-1]):
                v = v[:-1]
            area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
            if area < 0:
                v = v[::-1]
            v = np.vstack([v, v[:1]])
        seg = np.diff(v, axis=0)
        seglen = np.linalg.norm(seg, axis=1)
        if np.any(seglen == 0):
            raise ValidationError([("front.vertices", "repeated consecutive vertices")])
        cum = np.concatenate([[0.0], np.cumsum(seglen)])
        total = cum[-1]

        def curve(s):
            s = np.asarray(s, float)
            arc = (s % 1.0 if closed else np.clip(s, 0, 1)) * total
            k = np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, len(seg) - 1)
            p = v[k] + ((arc - cum[k]) / seglen[k])[..., None] * seg[k]
            e = seg[k] / seglen[k][..., None]
            # at a vertex use the bisector tangent
            at_vertex = np.isclose(arc, cum[k]) & ((k > 0) | closed)
            prev = seg[k - 1] / seglen[k - 1][..., None]
            eb = e + prev
            nb = np.linalg.norm(eb, axis=-1, keepdims=True)
            e = np.where(at_vertex[..., None] & (nb > 1e-12), eb / np.where(nb > 0, nb, 1), e)
            nrm = np.stack([e[..., 1], -e[..., 0]], axis=-1)
            return p, e, nrm

        s = np.arange(n) / n if closed else np.linspace(0, 1, n)
        pts, tan, nrm = curve(s)
        return cls(pts, tan, nrm, closed, "polyline", curve, max_spacing)


# -- wavemap --------------------------------------------------------------------


@dataclass
class Wavemap:
    t: np.ndarray  # (m + 1,)
    x: np.ndarray  # (m + 1, N, n)
    xdot: np.ndarray
    end: np.ndarray  # last valid step per seed
    status: np.ndarray  # "ok" | "exit" | "rejected" | "no_solution"
    exit_time: np.ndarray
    front: InitialFront
    side: str
    params: IntegratorParams
    metric: SpacetimeMetric
    failures: dict = field(default_factory=dict)
    drift: np.ndarray = None

    @property
    def dt(self):
        return self.params.dt

    @property
    def n_seeds(self):
        return self.x.shape[1]

    @property
    def closed(self):
        return self.front.closed


def propagate(metric, front: InitialFront, params: IntegratorParams, side="outward", t0=0.0, threads=None) -> Wavemap:
    """Launch one lightlike G-orthogonal pregeodesic per seed.

    Seeds are integrated in fixed chunks of ``CHUNK``, so the output does not depend
    on the number of worker threads.
    """
    st = spacetime_for(metric)
    if side not in ("outward", "inward"):
        raise ValueError("side must be 'outward' or 'inward'")
    X0 = front.points
    V0, failed = orthogonal_velocities(st, t0, X0, front.tangents, front.normals, side)
    good = np.array([f is None for f in failed])
    if not np.any(good):
        raise NoSolution("no seed admits a lightlike G-orthogonal direction on side " + side)
    idx = np.flatnonzero(good)
    chunks = [idx[i : i + CHUNK] for i in range(0, idx.size, CHUNK)]
    workers = thread_count() if threads is None else max(1, int(threads))

    def run(ch):
        return integrate_batch(st, t0, X0[ch], V0[ch], params)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(ch) for ch in chunks]

    m = params.steps
    N, n = X0.shape
    T = results[0].t
    X = np.full((m + 1, N, n), np.nan)
    V = np.full((m + 1, N, n), np.nan)
    drift = np.full((m + 1, N), np.nan)
    end = np.zeros(N, dtype=int)
    status = np.full(N, CAUSE_NO_SOLUTION, dtype=object)
    exit_time = np.full(N, t0)
    X[0] = X0
    for ch, b in zip(chunks, results):
        X[:, ch], V[:, ch], drift[:, ch] = b.x, b.xdot, b.drift
        end[ch], status[ch], exit_time[ch] = b.end, b.status, b.exit_time
    failures = {int(i): failed[i] for i in np.flatnonzero(~good)}
    return Wavemap(T, X, V, end, status, exit_time, front, side, params, st, failures, drift)


# -- cut detection ----------------------------------------------------------------


@dataclass
class CutRecord:
    seed: int
    t_cut: float  # inf for the horizon proxy
    cause: str
    witness: object = None  # other seed (intersection) or determinant value (focal)


def _neighbours(N, closed):
    left = np.arange(N) - 1
    right = np.arange(N) + 1
    if closed:
        return left % N, right % N
    return np.maximum(left, 0), np.minimum(right, N - 1)


def _focal_times(wm: Wavemap):
    """First sign change of det[x_s | x_t] relative to its initial sign, per seed."""
    N = wm.n_seeds
    L, R = _neighbours(N, wm.closed)
    X, V, T = wm.x, wm.xdot, wm.t
    xs = X[:, R] - X[:, L]
    det = xs[..., 0] * V[..., 1] - xs[..., 1] * V[..., 0]
    scale = np.linalg.norm(xs, axis=-1) * np.linalg.norm(V, axis=-1)
    valid = np.isfinite(det)
    sig = valid & (np.abs(det) > 1e-9 * scale)
    # reference sign: first significant sample per seed
    first = np.argmax(sig, axis=0)
    has = sig[first, np.arange(N)]
    ref = np.sign(det[first, np.arange(N)])
    out = np.full(N, np.inf)
    wit = np.full(N, np.nan)
    flipped = valid & (np.sign(det) * ref[None, :] < 0) & (np.arange(len(T))[:, None] > first[None, :])
    for i in np.flatnonzero(has & np.any(flipped, axis=0)):
        k = int(np.argmax(flipped[:, i]))
        d0, d1 = det[k - 1, i], det[k, i]
        frac = d0 / (d0 - d1) if d0 != d1 else 1.0
        out[i] = T[k - 1] + frac * (T[k] - T[k - 1])
        wit[i] = d1
    return out, wit


def _intersection_events(wm: Wavemap):
    """Candidate crossings between trajectory segments, found with a uniform spatial hash.

    Returns arrays (seed_a, k_a, alpha, seed_b, k_b, beta, px, py).
    """
    X = wm.x
    m1, N, _ = X.shape
    P0, P1 = X[:-1], X[1:]
    ok = np.all(np.isfinite(P0), axis=-1) & np.all(np.isfinite(P1), axis=-1)
    k_idx, s_idx = np.nonzero(ok)
    a, b = P0[k_idx, s_idx], P1[k_idx, s_idx]
    empty = tuple(np.zeros(0, dtype=int) for _ in range(2)) + (np.zeros(0),) + tuple(np.zeros(0, dtype=int) for _ in range(2)) + (np.zeros(0),) * 3
    if a.shape[0] < 2:
        return empty
    disp = np.linalg.norm(b - a, axis=1)
    cell = 2.0 * max(disp.max(), 1e-12)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    origin = lo.min(axis=0)
    c0 = np.floor((lo - origin) / cell).astype(np.int64)
    c1 = np.floor((hi - origin) / cell).astype(np.int64)
    ny = int(np.floor((hi[:, 1].max() - origin[1]) / cell)) + 2
    seg = np.arange(a.shape[0])
    ents_seg, ents_key = [], []
    for dx in (0, 1):
        for dy in (0, 1):
            cx = c0[:, 0] + dx
            cy = c0[:, 1] + dy
            use = (cx <= c1[:, 0]) & (cy <= c1[:, 1])
            ents_seg.append(seg[use])
            ents_key.append(cx[use] * ny + cy[use])
    es = np.concatenate(ents_seg)
    ek = np.concatenate(ents_key)
    order = np.lexsort((es, ek))
    es, ek = es[order], ek[order]
    starts = np.flatnonzero(np.r_[True, ek[1:] != ek[:-1]])
    sizes = np.diff(np.r_[starts, ek.size])
    grp_start = np.repeat(starts, sizes)
    grp_end = grp_start + np.repeat(sizes, sizes)
    pos = np.arange(ek.size)
    cnt = grp_end - pos - 1
    total = int(cnt.sum())
    if total == 0:
        return empty
    first = np.repeat(pos, cnt)
    offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    second = first + 1 + offs
    A, B = es[first], es[second]
    lo_ab, hi_ab = np.minimum(A, B), np.maximum(A, B)
    key = np.unique(lo_ab * a.shape[0] + hi_ab)
    A, B = key // a.shape[0], key % a.shape[0]
    sa, ka, sb, kb = s_idx[A], k_idx[A], s_idx[B], k_idx[B]
    keep = ~((sa == sb) & (np.abs(ka - kb) <= 1))
    keep &= np.all(lo[A] <= hi[B] + 1e-15, axis=1) & np.all(lo[B] <= hi[A] + 1e-15, axis=1)
    A, B, sa, ka, sb, kb = A[keep], B[keep], sa[keep], ka[keep], sb[keep], kb[keep]
    hit, al, be = _segments_cross(a[A], b[A], a[B], b[B])
    A, B, al, be = A[hit], B[hit], al[hit], be[hit]
    p = a[A] + al[:, None] * (b[A] - a[A])
    return s_idx[A], k_idx[A], al, s_idx[B], k_idx[B], be, p[:, 0], p[:, 1]


def detect_cuts(wm: Wavemap, resolution_factor=10.0, tie=1e-6):
    """Cut instant and cause for every seed."""
    N = wm.n_seeds
    T, dt = wm.t, wm.dt
    cut = np.full(N, np.inf)
    cause = np.full(N, CAUSE_HORIZON, dtype=object)
    witness = [None] * N
    for i in range(N):
        if wm.status[i] == CAUSE_NO_SOLUTION:
            cut[i], cause[i] = T[0], CAUSE_NO_SOLUTION
        elif wm.status[i] != STATUS_OK:
            cut[i], cause[i] = wm.exit_time[i], CAUSE_EXIT
    focal, det = _focal_times(wm)
    for i in np.flatnonzero(focal < cut):
        cut[i], cause[i], witness[i] = focal[i], CAUSE_FOCAL, float(det[i])

    sa, ka, al, sb, kb, be, px, py = _intersection_events(wm)
    ta = T[ka] + al * dt
    tb = T[kb] + be * dt
    # a crossing at different times only cuts the later arriver where waiting is causal
    same = ka == kb
    if np.any(~same):
        pts = np.stack([px, py], axis=-1)
        idx = np.flatnonzero(~same)
        t_late = np.maximum(ta[idx], tb[idx])
        causal = wm.metric.G(t_late, pts[idx], 1.0, np.zeros_like(pts[idx])) > 0
        keep = np.ones(sa.size, dtype=bool)
        keep[idx[~causal]] = False
        sa, ka, al, sb, kb, be, ta, tb = (arr[keep] for arr in (sa, ka, al, sb, kb, be, ta, tb))
    late = np.maximum(ta, tb)
    inter = np.full(N, np.inf)
    inter_wit = [None] * N
    for e in np.argsort(late, kind="stable"):
        s1, t1, s2, t2 = int(sa[e]), ta[e], int(sb[e]), tb[e]
        if t1 < t2:
            s1, t1, s2, t2 = s2, t2, s1, t1  # s1 is the later arriver
        if abs(t1 - t2) < tie:
            if t1 <= cut[s1] and t2 <= cut[s2] and t1 < inter[s1] and t2 < inter[s2]:
                inter[s1], inter_wit[s1] = t1, s2
                inter[s2], inter_wit[s2] = t2, s1
            continue
        if t2 <= min(cut[s2], inter[s2]) and t1 < inter[s1] and t1 <= cut[s1]:
            inter[s1], inter_wit[s1] = t1, s2
    for i in range(N):
        if inter[i] < np.inf and inter[i] <= cut[i]:
            if cause[i] == CAUSE_FOCAL and abs(cut[i] - inter[i]) <= dt:
                cause[i] = CAUSE_BOTH
                witness[i] = {"seed": inter_wit[i], "det": witness[i]}
            else:
                cause[i], witness[i] = CAUSE_INTERSECTION, inter_wit[i]
            cut[i] = inter[i]
        elif cause[i] == CAUSE_FOCAL and inter[i] - cut[i] <= dt:
            cause[i] = CAUSE_BOTH
            witness[i] = {"seed": inter_wit[i], "det": witness[i]}

    _check_resolution(wm, cut, cause, resolution_factor)
    return [CutRecord(i, float(cut[i]), str(cause[i]), witness[i]) for i in range(N)]


def _check_resolution(wm, cut, cause, factor):
    mask = np.isin(cause, [CAUSE_INTERSECTION, CAUSE_FOCAL, CAUSE_BOTH])
    if not np.any(mask):
        return
    init = np.median(wm.front.spacing)
    L, R = _neighbours(wm.n_seeds, wm.closed)
    tc = np.where(np.isfinite(cut), cut, wm.t[-1])
    k = np.clip(np.floor((tc - wm.t[0]) / wm.dt + 1e-9).astype(int), 0, len(wm.t) - 1)
    seeds = np.flatnonzero(mask)
    xi = wm.x[k[seeds], seeds]
    gap = np.fmax(np.linalg.norm(wm.x[k[seeds], R[seeds]] - xi, axis=-1), np.linalg.norm(wm.x[k[seeds], L[seeds]] - xi, axis=-1))
    bad = np.sum(gap > factor * init)
    if bad:
        warnings.warn(
            f"{bad} cut seed(s) have neighbour spacing above {factor:g}x the initial spacing; increase the seed count",
            ResolutionWarning,
            stacklevel=3,
        )


def cut_array(cuts):
    return np.array([c.t_cut for c in cuts])


# -- slices -----------------------------------------------------------------------


@dataclass
class FrontSlice:
    t: float
    points: np.ndarray  # (M, 2) surviving points in seed order
    seeds: np.ndarray  # (M,) seed index of each point
    segments: list  # list of arrays of row indices into points, one per unbroken run
    closed: bool  # True when the slice is a single closed curve
    cyclic: bool = True  # whether the seeds come from a closed front

    @property
    def breaks(self):
        """Number of gaps left by discarded seed runs."""
        if self.closed or not self.segments:
            return 0
        return len(self.segments) - (0 if self.cyclic else 1)

    def polylines(self):
        out = []
        for seg in self.segments:
            p = self.points[seg]
            out.append(np.vstack([p, p[:1]]) if self.closed else p)
        return out


def positions_at(wm: Wavemap, t):
    """Positions of every seed at ``t`` (linear in time between steps) and a validity mask."""
    T = wm.t
    if t < T[0] - 1e-12 or t > T[-1] + 1e-12:
        raise OutOfHorizon(f"t={t:g} outside [{T[0]:g}, {T[-1]:g}]")
    u = (t - T[0]) / wm.dt
    k = int(np.floor(u + 1e-9))
    k = min(max(k, 0), len(T) - 1)
    f = u - k
    if k == len(T) - 1 or abs(f) < 1e-9:
        P = wm.x[k].copy()
    else:
        P = (1 - f) * wm.x[k] + f * wm.x[k + 1]
    ok = np.all(np.isfinite(P), axis=-1)
    return P, ok


def front_at(wm: Wavemap, cuts, t) -> FrontSlice:
    P, ok = positions_at(wm, t)
    cut = cut_array(cuts) if not isinstance(cuts, np.ndarray) else cuts
    alive = ok & (t <= cut + 1e-12)
    seeds = np.flatnonzero(alive)
    N = wm.n_seeds
    runs = []
    if seeds.size:
        brk = np.flatnonzero(np.diff(seeds) != 1) + 1
        runs = [r for r in np.split(np.arange(seeds.size), brk)]
        if wm.closed and len(runs) > 1 and seeds[0] == 0 and seeds[-1] == N - 1:
            runs[0] = np.concatenate([runs[-1], runs[0]])
            runs.pop()
    closed = wm.closed and seeds.size == N
    return FrontSlice(float(t), P[seeds], seeds, runs, closed, wm.closed)


# -- first-arrival times ------------------------------------------------------------


@dataclass
class Grid2D:
    """Cell-centred regular grid over ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int

    @property
    def hx(self):
        return (self.xmax - self.xmin) / self.nx

    @property
    def hy(self):
        return (self.ymax - self.ymin) / self.ny

    @property
    def diameter(self):
        return float(np.hypot(self.hx, self.hy))

    def centres(self):
        xs = self.xmin + (np.arange(self.nx) + 0.5) * self.hx
        ys = self.ymin + (np.arange(self.ny) + 0.5) * self.hy
        return xs, ys


def _sweep_triangles(wm: Wavemap, cuts):
    """Triangles tiling the region swept between neighbouring surviving trajectories.

    Returns vertices (K, 3, 2), vertex times (K, 3) and the seed pair (K, 2)
    bounding each triangle.
    """
    X, T = wm.x, wm.t
    N = wm.n_seeds
    cut = cut_array(cuts) if not isinstance(cuts, np.ndarray) else cuts
    if wm.closed:
        i = np.arange(N)
        j = (i + 1) % N
    else:
        i = np.arange(N - 1)
        j = i + 1
    k = np.arange(1, len(T))
    K, I = np.meshgrid(k, i, indexing="ij")
    J = np.broadcast_to(j, I.shape)
    live = (T[K - 1] < np.minimum(cut[I], cut[J]))
    a, b = X[K - 1, I], X[K - 1, J]
    c, d = X[K, J], X[K, I]
    live &= np.all(np.isfinite(a) & np.isfinite(b) & np.isfinite(c) & np.isfinite(d), axis=-1)
    K, a, b, c, d = K[live], a[live], b[live], c[live], d[live]
    pair = np.stack([I[live], J[live]], axis=1)
    t0, t1 = T[K - 1], T[K]
    tri = np.concatenate([np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)])
    tt = np.concatenate([np.stack([t0, t0, t1], axis=1), np.stack([t0, t1, t1], axis=1)])
    return tri, tt, np.concatenate([pair, pair])


def _barycentric(tri, p, eps=1e-12):
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    v0, v1, v2 = b - a, c - a, p - a
    den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / den
        l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / den
    l0 = 1 - l1 - l2
    inside = (np.abs(den) > 0) & (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps)
    return inside, l0, l1, l2


def _source_fill(wm):
    return wm.front.kind == "point" and wm.side == "outward"


def arrival_at_points(wm: Wavemap, cuts, points, return_seeds=False):
    """First-arrival time at each query point (inf when not reached before the horizon).

    With ``return_seeds`` also returns the pair of neighbouring seeds whose
    trajectories enclose the first arrival (-1 when not reached).
    """
    pts = np.atleast_2d(np.asarray(points, float))
    tri, tt, pair = _sweep_triangles(wm, cuts)
    out = np.full(len(pts), np.inf)
    seeds = np.full((len(pts), 2), -1)
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    for q, p in enumerate(pts):
        cand = np.flatnonzero(np.all((lo <= p + 1e-12) & (hi >= p - 1e-12), axis=1))
        if cand.size:
            inside, l0, l1, l2 = _barycentric(tri[cand], p[None, :])
            if np.any(inside):
                tc = tt[cand]
                times = np.where(inside, l0 * tc[:, 0] + l1 * tc[:, 1] + l2 * tc[:, 2], np.inf)
                best = int(np.argmin(times))
                out[q] = times[best]
                seeds[q] = pair[cand[best]]
    if _source_fill(wm):
        r = np.linalg.norm(pts - wm.front.points.mean(axis=0), axis=1)
        out[r <= POINT_RADIUS] = wm.t[0]
    return (out, seeds) if return_seeds else out


def arrival_field(wm: Wavemap, cuts, grid: Grid2D):
    """First-arrival time at every cell centre; inf marks cells never reached."""
    xs, ys = grid.centres()
    tri, tt, _ = _sweep_triangles(wm, cuts)
    field_ = np.full((grid.nx, grid.ny), np.inf)
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    ix0 = np.ceil((lo[:, 0] - grid.xmin) / grid.hx - 0.5).astype(int)
    ix1 = np.floor((hi[:, 0] - grid.xmin) / grid.hx - 0.5).astype(int)
    iy0 = np.ceil((lo[:, 1] - grid.ymin) / grid.hy - 0.5).astype(int)
    iy1 = np.floor((hi[:, 1] - grid.ymin) / grid.hy - 0.5).astype(int)
    ix0, iy0 = np.maximum(ix0, 0), np.maximum(iy0, 0)
    ix1, iy1 = np.minimum(ix1, grid.nx - 1), np.minimum(iy1, grid.ny - 1)
    wx = np.maximum(ix1 - ix0 + 1, 0)
    wy = np.maximum(iy1 - iy0 + 1, 0)
    cnt = wx * wy
    tri_id = np.repeat(np.arange(len(tri)), cnt)
    if tri_id.size:
        local = np.arange(tri_id.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        gx = ix0[tri_id] + local % wx[tri_id]
        gy = iy0[tri_id] + local // wx[tri_id]
        p = np.stack([xs[gx], ys[gy]], axis=-1)
        inside, l0, l1, l2 = _barycentric(tri[tri_id], p)
        tc = tt[tri_id]
        times = l0 * tc[:, 0] + l1 * tc[:, 1] + l2 * tc[:, 2]
        np.minimum.at(field_, (gx[inside], gy[inside]), times[inside])
    if _source_fill(wm):
        c = wm.front.points.mean(axis=0)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        field_[np.hypot(X - c[0], Y - c[1]) <= POINT_RADIUS] = wm.t[0]
    return field_


def arrival_time_field(metric, front: InitialFront, grid: Grid2D, params: IntegratorParams, side="outward", threads=None):
    """Propagate, detect cuts and return the first-arrival field on ``grid``."""
    wm = propagate(metric, front, params, side, threads=threads)
    cuts = detect_cuts(wm)
    return arrival_field(wm, cuts, grid)
