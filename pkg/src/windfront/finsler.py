"""Finsler metrics of the Zermelo/Randers/Kropina catalogue and their conic domains.

All metrics other than :class:`CustomMetric` reduce pointwise to a *quadratic
cone* ``(Lam, omega, g0)``: a vector ``v`` has cost ``tau`` when

    Lam * tau**2 - 2 * omega(v) * tau - g0(v, v) = 0,

which is the light cone of ``-Lam dt^2 + 2 omega dt + g0`` cut at ``t = 1``.
Zermelo data ``(h, W)`` give ``(1 - h(W,W), -h(W,.), h)``; Randers data
``(a, b)`` give ``(1, b, a - b (x) b)``. The cost ``Z`` and, where ``Lam < 0``,
the reverse-branch cost ``Z_l`` are evaluated in the conjugate forms that stay
finite at critical wind.

Every method is batched: ``x`` and ``v`` carry leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, DomainViolation, NotMild, NotRanders
from .fields import ConstantField, Field, as_field

TAU_DOM = 1e-10
INTERIOR, BOUNDARY, OUTSIDE = "interior", "boundary", "outside"
_CSTEP = 1e-20


def _qf(m, u, w):
    """Batched bilinear form m(u, w)."""
    return np.einsum("...i,...ij,...j->...", u, m, w)


def _mv(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


# -- pointwise data types ------------------------------------------------------


@dataclass
class NavigationData:
    """Zermelo navigation data at one or more points: metric ``h`` and wind ``W``."""

    h: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.W = np.asarray(self.W, dtype=float)

    @property
    def lam(self):
        return 1.0 - _qf(self.h, self.W, self.W)

    def regime(self, tol=1e-12):
        lam = self.lam
        return np.where(lam > tol, "mild", np.where(lam < -tol, "strong", "critical"))


@dataclass
class RandersCoefficients:
    h_tilde: np.ndarray
    omega_tilde: np.ndarray

    def __post_init__(self):
        self.h_tilde = np.asarray(self.h_tilde, dtype=float)
        self.omega_tilde = np.asarray(self.omega_tilde, dtype=float)

    def norm(self):
        """||omega_tilde|| measured with h_tilde."""
        inv = np.linalg.solve(self.h_tilde, self.omega_tilde[..., None])[..., 0]
        return np.sqrt(np.einsum("...i,...i->...", self.omega_tilde, inv))


def randers_from_zermelo(nav: NavigationData) -> RandersCoefficients:
    lam = nav.lam
    if np.any(lam <= 0):
        raise NotMild(f"navigation data not mild (min lambda = {np.min(lam):.3g})")
    b = _mv(nav.h, nav.W)
    lam_ = np.asarray(lam)[..., None]
    h_tilde = nav.h / lam_[..., None] + _outer(b, b) / (lam_ ** 2)[..., None]
    return RandersCoefficients(h_tilde, -b / lam_)


def zermelo_from_randers(rc: RandersCoefficients) -> NavigationData:
    nrm = rc.norm()
    if np.any(nrm >= 1.0):
        raise NotRanders(f"||omega_tilde|| = {np.max(nrm):.6g} >= 1")
    b = rc.omega_tilde
    lam = (1.0 - nrm**2)[..., None]
    W = -np.linalg.solve(rc.h_tilde, b[..., None])[..., 0] / lam
    h = lam[..., None] * (rc.h_tilde - _outer(b, b))
    return NavigationData(h, W)


def check_positive_definite(h, what="h"):
    h = np.asarray(h)
    if not np.all(np.isfinite(h)):
        raise DegenerateMetric(f"{what} has non-finite entries")
    ev = np.linalg.eigvalsh(0.5 * (h + np.swapaxes(h, -1, -2)))
    if np.any(ev <= 0):
        raise DegenerateMetric(f"{what} is not positive definite (min eigenvalue {ev.min():.3g})")


# -- quadratic cone algebra ----------------------------------------------------


def cone_membership(Lam, omega, g0, v, tol=TAU_DOM):
    """Classify ``v`` against the domain A of the quadratic cone."""
    q = _qf(g0, v, v)
    w = np.einsum("...i,...i->...", omega, v)
    dhat = (w * w + Lam * q) / q
    what = w / np.sqrt(q)
    interior = (Lam > 0) | ((dhat > tol) & (w < 0))
    boundary = ~interior & (np.abs(dhat) <= tol) & (what <= np.sqrt(tol))
    return np.where(interior, INTERIOR, np.where(boundary, BOUNDARY, OUTSIDE))


def cone_cost(Lam, omega, g0, v, branch="Z"):
    """Z (or Z_l) from the conjugate forms; no domain checks, complex-safe."""
    q = _qf(g0, v, v)
    w = np.einsum("...i,...i->...", omega, v)
    disc = w * w + Lam * q
    if not np.iscomplexobj(disc):
        disc = np.maximum(disc, 0.0)
    root = np.sqrt(disc)
    if branch == "Z":
        return q / (root - w)
    return -q / (root + w)


def cone_tensor(Lam, omega, g0, v, branch="Z"):
    """Fundamental tensor of the cone cost by implicit differentiation."""
    tau = cone_cost(Lam, omega, g0, v, branch)
    w = np.einsum("...i,...i->...", omega, v)
    S = (Lam * tau - w)[..., None]
    grad = (_mv(g0, v) + tau[..., None] * omega) / S
    hess = (g0 + _outer(omega, grad) + _outer(grad, omega) - Lam[..., None, None] * _outer(grad, grad)) / S[..., None]
    return tau[..., None, None] * hess + _outer(grad, grad)


# -- metric kinds ----------------------------------------------------------------


class FinslerMetric:
    """Base class. Subclasses define ``fields`` and the pointwise formulas."""

    kind = "abstract"
    branches = ("Z",)

    def __init__(self, **fields):
        self.fields = {}
        for name, f in fields.items():
            self.fields[name] = as_field(f)
        self.n = self._dimension()

    def _dimension(self):
        for f in self.fields.values():
            if len(f.shape) >= 1:
                return f.shape[-1]
        raise ValueError("cannot infer dimension from scalar fields")

    @property
    def time_dependent(self):
        return any(f.time_dependent for f in self.fields.values())

    @property
    def homogeneous(self):
        return all(f.constant for f in self.fields.values())

    box = None  # optional spatial box (lo, hi) imposed on top of the field bounds

    @property
    def bounds(self):
        lo = hi = None
        if self.box is not None:
            lo, hi = (np.asarray(b, float) for b in self.box)
        for f in self.fields.values():
            if f.bounds is not None:
                flo, fhi = f.bounds
                lo = flo if lo is None else np.maximum(lo, flo)
                hi = fhi if hi is None else np.minimum(hi, fhi)
        return None if lo is None else (lo, hi)

    def params(self, x, t):
        return {k: f(x, t) for k, f in self.fields.items()}

    def param_derivs(self, x, t):
        return {k: f.derivatives(x, t) for k, f in self.fields.items() if not f.constant}

    # pointwise formulas on parameter dictionaries
    def _cost(self, p, v, branch):
        raise NotImplementedError

    def _tensor(self, p, v, branch):
        raise NotImplementedError

    def _membership(self, p, v):
        q = np.einsum("...i,...i->...", v, v)
        return np.where(q > 0, INTERIOR, OUTSIDE)

    def _check(self, p):
        pass

    # public batched evaluation
    default_branch = "Z"

    def cost(self, x, t, v, branch=None, check=True):
        branch = branch or self.default_branch
        x, v = np.asarray(x, float), np.asarray(v, float)
        p = self.params(x, t)
        if check:
            self._check(p)
            self._require(p, v, branch)
        return self._cost(p, v, branch)

    def membership(self, x, t, v):
        x, v = np.asarray(x, float), np.asarray(v, float)
        p = self.params(x, t)
        self._check(p)
        return self._membership(p, v)

    def tensor(self, x, t, v, branch=None, check=True):
        branch = branch or self.default_branch
        x, v = np.asarray(x, float), np.asarray(v, float)
        p = self.params(x, t)
        if check:
            self._check(p)
            self._require(p, v, branch, allow_boundary=False)
        return self._tensor(p, v, branch)

    def tensor_and_derivs(self, x, t, v, branch="Z"):
        """Fundamental tensor and its (t, x) partials at fixed ``v``.

        Partials are complex-step derivatives pushed through the field
        derivatives, so they are exact to rounding for analytic fields.
        """
        p = self.params(x, t)
        g = self._tensor(p, v, branch)
        m = np.shape(x)[-1] + 1
        dg = np.zeros((m,) + g.shape)
        if self.homogeneous:
            return g, dg
        dp = self.param_derivs(x, t)
        rows = range(m) if self.time_dependent else range(1, m)
        for r in rows:
            pc = {k: (val + 1j * _CSTEP * dp[k][r] if k in dp else val) for k, val in p.items()}
            dg[r] = self._tensor(pc, v, branch).imag / _CSTEP
        return g, dg

    def _require(self, p, v, branch, allow_boundary=True):
        if np.any(np.einsum("...i,...i->...", v, v) == 0):
            raise DomainViolation("zero tangent vector")
        mem = self._membership(p, v)
        ok = (mem == INTERIOR) | ((mem == BOUNDARY) if allow_boundary else False)
        if not np.all(ok):
            raise DomainViolation(f"vector outside the conic domain ({np.sum(~ok)} of {np.size(ok)})")
        if branch == "Zl":
            Lam = self.cone(p)[0] if hasattr(self, "cone") else np.ones(np.shape(v)[:-1])
            if np.any(Lam >= 0):
                raise DomainViolation("reverse branch Z_l only exists where the wind is strong")
        elif branch != "Z":
            raise ValueError(f"unknown branch {branch!r}")

    def reversed(self):
        """Metric with cost v -> F(-v)."""
        raise NotImplementedError


class QuadraticConeMetric(FinslerMetric):
    branches = ("Z", "Zl")

    def cone(self, p):
        raise NotImplementedError

    def cone_at(self, x, t):
        return self.cone(self.params(np.asarray(x, float), t))

    def _cost(self, p, v, branch):
        return cone_cost(*self.cone(p), v, branch)

    def _tensor(self, p, v, branch):
        return cone_tensor(*self.cone(p), v, branch)

    def _membership(self, p, v):
        return cone_membership(*self.cone(p), v)

    def _check(self, p):
        check_positive_definite(self.cone(p)[2], "g0")


class RiemannianMetric(QuadraticConeMetric):
    kind = "riemannian"
    branches = ("Z",)

    def __init__(self, h):
        super().__init__(h=h)

    def cone(self, p):
        h = p["h"]
        return np.ones(h.shape[:-2], dtype=h.dtype), np.zeros(h.shape[:-1], dtype=h.dtype), h

    def _cost(self, p, v, branch):
        return np.sqrt(_qf(p["h"], v, v))

    def _tensor(self, p, v, branch):
        return np.broadcast_to(p["h"], np.shape(v) + np.shape(v)[-1:]).copy()

    def _membership(self, p, v):
        return FinslerMetric._membership(self, p, v)

    def reversed(self):
        return self


class RandersMetric(QuadraticConeMetric):
    """F(v) = sqrt(h_tilde(v, v)) + omega_tilde(v)."""

    kind = "randers"
    branches = ("Z",)

    def __init__(self, h_tilde, omega_tilde):
        super().__init__(h_tilde=h_tilde, omega_tilde=omega_tilde)

    def cone(self, p):
        a, b = p["h_tilde"], p["omega_tilde"]
        return np.ones(a.shape[:-2], dtype=a.dtype), b, a - _outer(b, b)

    def _cost(self, p, v, branch):
        return np.sqrt(_qf(p["h_tilde"], v, v)) + np.einsum("...i,...i->...", p["omega_tilde"], v)

    def _tensor(self, p, v, branch):
        a, b = p["h_tilde"], p["omega_tilde"]
        alpha = np.sqrt(_qf(a, v, v))[..., None]
        ell = _mv(a, v) / alpha
        F = alpha + np.einsum("...i,...i->...", b, v)[..., None]
        return (F / alpha)[..., None] * (a - _outer(ell, ell)) + _outer(ell + b, ell + b)

    def _membership(self, p, v):
        return FinslerMetric._membership(self, p, v)

    def _check(self, p):
        check_positive_definite(p["h_tilde"], "h_tilde")
        nrm = RandersCoefficients(p["h_tilde"], p["omega_tilde"]).norm()
        if np.any(nrm >= 1.0 - 1e-12):
            raise NotRanders(f"||omega_tilde|| = {np.max(nrm):.6g} >= 1")

    def coefficients(self, x, t):
        p = self.params(np.asarray(x, float), t)
        return RandersCoefficients(p["h_tilde"], p["omega_tilde"])

    def reversed(self):
        return RandersMetric(self.fields["h_tilde"], -self.fields["omega_tilde"])


class ZermeloMetric(QuadraticConeMetric):
    """Zermelo navigation metric for an arbitrary (possibly strong) wind."""

    kind = "zermelo"

    def __init__(self, h, W):
        super().__init__(h=h, W=W)

    def cone(self, p):
        h, W = p["h"], p["W"]
        b = _mv(h, W)
        return 1.0 - np.einsum("...i,...i->...", b, W), -b, h

    def navigation(self, x, t):
        p = self.params(np.asarray(x, float), t)
        return NavigationData(p["h"], p["W"])

    def reversed(self):
        return ZermeloMetric(self.fields["h"], -self.fields["W"])


class KropinaMetric(QuadraticConeMetric):
    """F(v) = -h(v, v) / (2 omega(v)) on the half-space omega(v) < 0."""

    kind = "kropina"

    def __init__(self, h, omega):
        super().__init__(h=h, omega=omega)

    @classmethod
    def from_wind(cls, h, W):
        """Critical-wind data: omega = -h(W, .) with h(W, W) = 1."""
        h = as_field(h)
        W = as_field(W)
        if not (h.constant and W.constant):
            raise ValueError("from_wind needs constant fields; pass omega directly")
        hv = h(np.zeros(W.shape), 0.0)
        Wv = W(np.zeros(W.shape), 0.0)
        if abs(Wv @ hv @ Wv - 1.0) > 1e-9:
            raise ValueError("Kropina data needs h(W, W) = 1")
        return cls(hv, -(hv @ Wv))

    def cone(self, p):
        h, om = p["h"], p["omega"]
        return np.zeros(h.shape[:-2], dtype=h.dtype), om, h

    def reversed(self):
        return KropinaMetric(self.fields["h"], -self.fields["omega"])


class SSTKProjectedMetric(QuadraticConeMetric):
    """Fermat metric of an SSTK spacetime ``-Lam dt^2 + 2 omega dt + g0``.

    ``branch`` selects F (the default "Z") or F_l ("Zl") when used as the
    default branch of :meth:`cost`.
    """

    kind = "sstk_projected"

    def __init__(self, Lam, omega, g0, branch="Z"):
        super().__init__(Lam=Lam, omega=omega, g0=g0)
        self.branch = branch
        self.default_branch = branch

    def cone(self, p):
        return p["Lam"], p["omega"], p["g0"]

    def navigation(self, x, t):
        """Navigation data of the conformal class (h = g0 / (Lam + ||omega||^2), W = -g0^{-1} omega)."""
        Lam, om, g0 = self.cone_at(x, t)
        sharp = np.linalg.solve(g0, om[..., None])[..., 0]
        norm2 = np.einsum("...i,...i->...", om, sharp)
        return NavigationData(g0 / (Lam + norm2)[..., None, None], -sharp)

    def reversed(self):
        f = self.fields
        return SSTKProjectedMetric(f["Lam"], -f["omega"], f["g0"], self.branch)


class CustomMetric(FinslerMetric):
    """Metric given by a callable ``F(x, t, v)`` (batched, strongly convex indicatrix).

    Fundamental tensor by central differences of F^2 / 2 with step
    ``1e-5 * |v|`` and two-level Richardson extrapolation; its spatial and
    temporal partials by 4th-order central differences in (t, x).
    """

    kind = "custom"

    def __init__(self, func, n, time_dependent=False, domain=None, xstep=1e-3):
        self.func = func
        self.fields = {}
        self.n = n
        self._time_dependent = time_dependent
        self._domain = domain
        self.xstep = xstep

    @property
    def time_dependent(self):
        return self._time_dependent

    @property
    def homogeneous(self):
        return False

    def params(self, x, t):
        return {"x": np.asarray(x, float), "t": t}

    def _cost(self, p, v, branch):
        return np.asarray(self.func(p["x"], p["t"], v), dtype=float)

    def _membership(self, p, v):
        if self._domain is None:
            return FinslerMetric._membership(self, p, v)
        return self._domain(p["x"], p["t"], v)

    def _tensor(self, p, v, branch):
        v = np.asarray(v, float)
        scale = np.linalg.norm(v, axis=-1)[..., None]

        def hess(h):
            n = v.shape[-1]
            E = np.eye(n)
            out = np.empty(v.shape + (n,))
            for i in range(n):
                for j in range(i, n):
                    ei = h * E[i]
                    ej = h * E[j]
                    fpp = self._cost(p, v + ei + ej, branch) ** 2
                    fpm = self._cost(p, v + ei - ej, branch) ** 2
                    fmp = self._cost(p, v - ei + ej, branch) ** 2
                    fmm = self._cost(p, v - ei - ej, branch) ** 2
                    val = (fpp - fpm - fmp + fmm) / (4 * h[..., 0] ** 2)
                    out[..., i, j] = out[..., j, i] = 0.5 * val
            return out

        h1 = 1e-5 * scale
        coarse = hess(2 * h1)
        fine = hess(h1)
        return fine + (fine - coarse) / 3.0

    def tensor_and_derivs(self, x, t, v, branch="Z"):
        x = np.asarray(x, float)
        g = self._tensor(self.params(x, t), v, branch)
        m = x.shape[-1] + 1
        dg = np.zeros((m,) + g.shape)
        h = self.xstep

        def at(dx, dt):
            return self._tensor(self.params(x + dx, t + dt), v, branch)

        if self.time_dependent:
            dg[0] = (-at(0, 2 * h) + 8 * at(0, h) - 8 * at(0, -h) + at(0, -2 * h)) / (12 * h)
        for k in range(m - 1):
            e = np.zeros(m - 1)
            e[k] = h
            dg[k + 1] = (-at(2 * e, 0) + 8 * at(e, 0) - 8 * at(-e, 0) + at(-2 * e, 0)) / (12 * h)
        return g, dg

    def reversed(self):
        dom = None
        if self._domain is not None:
            dom = lambda x, t, v: self._domain(x, t, -v)  # noqa: E731
        return CustomMetric(lambda x, t, v: self.func(x, t, -v), self.n, self._time_dependent, dom, self.xstep)


# -- module-level operations ---------------------------------------------------


def eval_metric(spec: FinslerMetric, x, t, v, branch=None):
    """Time-cost of ``v`` at ``(x, t)``; raises DomainViolation outside A (or A_l)."""
    out = spec.cost(x, t, v, branch)
    return float(out) if np.ndim(out) == 0 else out


def domain_contains(spec: FinslerMetric, x, t, v):
    out = spec.membership(x, t, v)
    return str(out) if np.ndim(out) == 0 else out


def fundamental_tensor(spec: FinslerMetric, x, t, v, branch=None):
    return spec.tensor(x, t, v, branch)


def indicatrix_sample(spec: FinslerMetric, x, t, n: int, return_branches=False):
    """``n`` points of the unit-cost set at ``(x, t)``.

    For quadratic-cone metrics the indicatrix is the g0-sphere of radius
    ``sqrt(Lam + ||omega||^2)`` centred at ``-g0^{-1} omega``; under strong wind
    each sample belongs to the Z or the Z_l branch (reported when
    ``return_branches`` is set).
    """
    if n < 3:
        raise ValueError("need at least 3 indicatrix samples")
    x = np.asarray(x, float)
    dim = spec.n
    dirs = _unit_directions(dim, n)
    if isinstance(spec, QuadraticConeMetric):
        Lam, om, g0 = (np.asarray(a) for a in spec.cone_at(x, t))
        L = np.linalg.cholesky(g0)
        centre = -np.linalg.solve(g0, om)
        radius = np.sqrt(Lam + om @ -centre)
        # g0-unit vectors: solve L^T u = d
        units = np.linalg.solve(L.T, dirs.T).T
        pts = centre + radius * units
        if not return_branches:
            return pts
        mem = cone_membership(Lam, om, g0, pts)
        zb = np.full(n, "Z", dtype=object)
        if Lam < 0:
            ok = mem != OUTSIDE
            z = np.where(ok, cone_cost(Lam, om, g0, pts, "Z"), np.inf)
            zl = np.where(ok, cone_cost(Lam, om, g0, pts, "Zl"), np.inf)
            zb = np.where(np.abs(z - 1) <= np.abs(zl - 1), "Z", "Zl")
        return pts, zb
    xs = np.broadcast_to(x, dirs.shape)
    pts = dirs / spec.cost(xs, t, dirs)[:, None]
    return (pts, np.full(n, "Z", dtype=object)) if return_branches else pts


def _unit_directions(dim, n):
    if dim == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Fibonacci lattice on the sphere for dim == 3
    if dim == 3:
        k = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * k / n)
        theta = np.pi * (1 + 5**0.5) * k
        return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    raise NotImplementedError("indicatrix sampling supports dimensions 2 and 3")


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def path_length(spec: FinslerMetric, curve, t=0.0, frozen=True, branch=None):
    """Length of a polyline (``(m, n)`` vertices) under ``spec``.

    With ``frozen`` the metric is taken at the fixed instant ``t``; otherwise
    the curve is traversed at the prescribed speed starting at ``t`` and the
    returned value is the elapsed (arrival) time.
    """
    pts = np.asarray(curve, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("curve must be an (m, n) array with m >= 2")
    seg = np.diff(pts, axis=0)
    keep = np.einsum("ij,ij->i", seg, seg) > 0
    pts0, seg = pts[:-1][keep], seg[keep]
    if frozen or not spec.time_dependent:
        s = 0.5 * (_GL_NODES + 1.0)
        xq = pts0[:, None, :] + s[None, :, None] * seg[:, None, :]
        vq = np.broadcast_to(seg[:, None, :], xq.shape)
        costs = spec.cost(xq, t, vq, branch)
        return float(np.sum(costs @ (0.5 * _GL_WEIGHTS)))
    # arrival-time traversal: dt/ds = F_t(x(s))(dx/ds), RK4 with 8 substeps per segment
    clock = float(t)
    for p0, d in zip(pts0, seg):
        h = 1.0 / 8
        for k in range(8):
            s = k * h

            def rate(s_, c_):
                return float(spec.cost(p0 + s_ * d, c_, d, branch))

            k1 = rate(s, clock)
            k2 = rate(s + h / 2, clock + h / 2 * k1)
            k3 = rate(s + h / 2, clock + h / 2 * k2)
            k4 = rate(s + h, clock + h * k3)
            clock += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return clock - float(t)


def zermelo(h, W):
    return ZermeloMetric(h, W)


def isotropic(speed, n=2):
    """Riemannian metric whose unit sphere has radius ``speed``."""
    f = as_field(speed)
    if isinstance(f, ConstantField):
        return RiemannianMetric(np.eye(n) / float(f.value) ** 2)
    return RiemannianMetric(_IsotropicField(f, n))


class _IsotropicField(Field):
    def __init__(self, speed, n):
        self.speed = speed
        self.n = n
        self.shape = (n, n)
        self.time_dependent = speed.time_dependent
        self.constant = speed.constant
        self.bounds = speed.bounds

    def __call__(self, x, t):
        c = self.speed(x, t)
        return c[..., None, None] ** -2 * np.eye(self.n)

    def derivatives(self, x, t):
        c = self.speed(x, t)
        dc = self.speed.derivatives(x, t)
        return (-2 * dc * c**-3)[..., None, None] * np.eye(self.n)
