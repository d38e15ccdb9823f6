"""Spacetime metrics on R x M whose future light cones carry the wind cone.

Sign convention: G > 0 on future timelike vectors. Two kinds:

* :class:`LorentzFinslerSpacetime` -- ``G(tau, v) = tau^2 - F_t(v)^2``;
* :class:`SSTKSpacetime` -- ``G(tau, v) = Lam tau^2 - 2 omega(v) tau - g0(v, v)``
  (an SSTK metric negated on ingestion).

Coordinates are ``(x^0 = t, x^1, ..., x^n)``; all methods are batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, SignatureViolation, SmoothnessViolation
from .fields import Field, as_field
from .finsler import (
    INTERIOR,
    BOUNDARY,
    FinslerMetric,
    NavigationData,
    QuadraticConeMetric,
    SSTKProjectedMetric,
    ZermeloMetric,
    _CSTEP,
    _mv,
    _qf,
    cone_membership,
)

SMOOTH_GUARD = 1e-6  # half-angle of the excluded cone around d/dt


def tau_null(tau, v):
    return 1e-9 * (np.asarray(tau) ** 2 + np.einsum("...i,...i->...", v, v))


@dataclass
class SpacetimeVector:
    tau: float
    v: np.ndarray
    t: float = 0.0
    x: np.ndarray = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float)


class SpacetimeMetric:
    kind = "abstract"
    finsler: FinslerMetric

    @property
    def n(self):
        return self.finsler.n

    @property
    def homogeneous(self):
        return self.finsler.homogeneous

    @property
    def time_dependent(self):
        return self.finsler.time_dependent

    @property
    def bounds(self):
        return self.finsler.bounds

    def G(self, t, x, tau, v):
        raise NotImplementedError

    def tensor_and_derivs(self, t, x, tau, v):
        raise NotImplementedError

    def tensor(self, t, x, tau, v):
        return self.tensor_and_derivs(t, x, tau, v)[0]

    def christoffel(self, t, x, tau, v):
        """Formal Christoffel symbols ``gamma[..., k, i, j]`` at the vector (tau, v)."""
        g, dg = self.tensor_and_derivs(t, x, tau, v)
        D = np.moveaxis(dg, 0, -3)  # [..., r, i, j] = d_r g_ij
        first = 0.5 * (np.swapaxes(D, -3, -2) + np.moveaxis(np.swapaxes(D, -3, -2), -1, -2) - D)
        # first[..., r, i, j] = 1/2 (d_i g_rj + d_j g_ri - d_r g_ij)
        m = g.shape[-1]
        flat = first.reshape(first.shape[:-2] + (m * m,))
        return np.linalg.solve(g, flat).reshape(first.shape)

    def acceleration(self, t, x, xdot):
        """Right-hand side of the t-parametrised lightlike pregeodesic ODE.

        ``xddot^k = sum_ij (-gamma^k_ij + gamma^0_ij xdot^k) xdot^i xdot^j``
        with ``xdot^0 = 1``.
        """
        if self.homogeneous:
            return np.zeros_like(xdot)
        tau = np.ones(xdot.shape[:-1])
        g, dg = self.tensor_and_derivs(t, x, tau, xdot)
        U = np.concatenate([tau[..., None], xdot], axis=-1)
        D = np.moveaxis(dg, 0, -3)
        q = np.einsum("...irj,...i,...j->...r", D, U, U) - 0.5 * np.einsum("...rij,...i,...j->...r", D, U, U)
        qa = np.linalg.solve(g, q[..., None])[..., 0]
        return -qa[..., 1:] + qa[..., :1] * xdot

    def null_scale(self, t, x, xdot):
        """Positive factor s with G(1, s xdot) = 0 (the root nearest 1)."""
        raise NotImplementedError

    def lifts(self, t, x, d):
        raise NotImplementedError

    def cone_point(self, t, x, phi):
        """Spatial velocity v with (1, v) lightlike, parametrised by an angle (n = 2)."""
        raise NotImplementedError

    def cone_angle(self, t, x, v):
        raise NotImplementedError

    def admissible(self, t, x, xdot):
        """Mask of velocities where the ODE is defined (conic domain, smoothness)."""
        return np.ones(np.shape(xdot)[:-1], dtype=bool)

    def orthogonal_closed_form(self, t, x, e):
        return None


class LorentzFinslerSpacetime(SpacetimeMetric):
    kind = "lorentz_finsler"

    def __init__(self, finsler: FinslerMetric):
        self.finsler = finsler

    def G(self, t, x, tau, v):
        v = np.asarray(v, float)
        tau = np.asarray(tau, float)
        nz = np.einsum("...i,...i->...", v, v) > 0
        F = np.zeros(v.shape[:-1])
        if np.any(nz):
            vv = np.where(nz[..., None], v, 1.0)
            F = np.where(nz, self.finsler.cost(x, t, vv, check=False), 0.0)
            mem = self.finsler.membership(x, t, vv)
            if np.any(nz & (mem != INTERIOR) & (mem != BOUNDARY)):
                raise DomainViolation("spatial part outside the conic domain of F")
        return tau**2 - F**2

    def _guard(self, tau, v):
        if np.any(np.linalg.norm(v, axis=-1) <= np.tan(SMOOTH_GUARD) * np.abs(tau)):
            raise SmoothnessViolation("vector within the guard cone around d/dt")

    def tensor_and_derivs(self, t, x, tau, v):
        x, v = np.asarray(x, float), np.asarray(v, float)
        tau = np.broadcast_to(np.asarray(tau, float), v.shape[:-1])
        self._guard(tau, v)
        gv, dgv = self.finsler.tensor_and_derivs(x, t, v)
        n = v.shape[-1]
        g = np.zeros(v.shape[:-1] + (n + 1, n + 1))
        g[..., 0, 0] = 1.0
        g[..., 1:, 1:] = -gv
        dg = np.zeros((n + 1,) + g.shape)
        dg[..., 1:, 1:] = -dgv
        return g, dg

    def null_scale(self, t, x, xdot):
        return 1.0 / self.finsler.cost(x, t, xdot, check=False)

    def admissible(self, t, x, xdot):
        return self.finsler._membership(self.finsler.params(x, t), xdot) == INTERIOR

    def lifts(self, t, x, d):
        d = np.asarray(d, float)
        mem = self.finsler.membership(x, t, d)
        if mem != INTERIOR and mem != BOUNDARY:
            return []
        tau = float(self.finsler.cost(x, t, d, check=False))
        return [SpacetimeVector(tau, d, t, x)]

    def cone_point(self, t, x, phi):
        phi = np.asarray(phi, float)
        d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        x = np.broadcast_to(np.asarray(x, float), d.shape)
        p = self.finsler.params(x, t)
        ok = self.finsler._membership(p, d) == INTERIOR
        dd = np.where(ok[..., None], d, np.array([1.0, 0.0]))
        with np.errstate(all="ignore"):
            F = self.finsler._cost(p, dd, "Z")
        return np.where(ok[..., None], d / F[..., None], np.nan)

    def cone_angle(self, t, x, v):
        v = np.asarray(v, float)
        return np.arctan2(v[..., 1], v[..., 0])

    def orthogonal_closed_form(self, t, x, e):
        if not isinstance(self.finsler, QuadraticConeMetric):
            return None
        cands = _cone_orthogonal(*self.finsler.cone_at(x, t), e)
        # keep only solutions on the Z branch (the cone of tau^2 - Z^2)
        out = []
        for v in cands:
            mem = self.finsler._membership(self.finsler.params(np.asarray(x, float), t), v)
            if mem == INTERIOR and abs(self.finsler.cost(x, t, v, check=False) - 1.0) < 1e-9:
                out.append(v)
        return out


class SSTKMetric:
    """SSTK data ``(Lam, omega, g0)``: the Lorentzian metric -Lam dt^2 + 2 omega dt + g0."""

    def __init__(self, Lam, omega, g0):
        self.Lam = as_field(Lam)
        self.omega = as_field(omega)
        self.g0 = as_field(g0)

    def at(self, x, t=0.0):
        x = np.asarray(x, float)
        return self.Lam(x, t), self.omega(x, t), self.g0(x, t)

    def check_signature(self, x, t=0.0):
        Lam, om, g0 = self.at(x, t)
        norm2 = np.einsum("...i,...i->...", om, np.linalg.solve(g0, om[..., None])[..., 0])
        if np.any(Lam + norm2 <= 0):
            raise SignatureViolation("Lam + ||omega||^2 <= 0: metric is not Lorentzian")

    def projected(self, branch="Z"):
        return SSTKProjectedMetric(self.Lam, self.omega, self.g0, branch)

    def scaled(self, phi):
        """Conformal rescaling by a positive constant."""
        phi = float(phi)
        return SSTKMetric(_scale(self.Lam, phi), _scale(self.omega, phi), _scale(self.g0, phi))


def _scale(f, c):
    from .fields import ScaledField

    return ScaledField(f, c)


class SSTKSpacetime(SpacetimeMetric):
    """Quadratic spacetime built from any quadratic-cone Finsler metric or SSTK data."""

    kind = "sstk"

    def __init__(self, source):
        if isinstance(source, SSTKMetric):
            source = source.projected()
        if not isinstance(source, QuadraticConeMetric):
            raise TypeError("SSTK spacetime needs SSTK data or a quadratic-cone metric")
        self.finsler = source

    def _cone(self, t, x):
        return self.finsler.cone(self.finsler.params(np.asarray(x, float), t))

    def G(self, t, x, tau, v):
        Lam, om, g0 = self._cone(t, x)
        v = np.asarray(v, float)
        tau = np.asarray(tau, float)
        return Lam * tau**2 - 2 * np.einsum("...i,...i->...", om, v) * tau - _qf(g0, v, v)

    @staticmethod
    def _matrix(Lam, om, g0):
        n = om.shape[-1]
        g = np.zeros(om.shape[:-1] + (n + 1, n + 1), dtype=om.dtype)
        g[..., 0, 0] = Lam
        g[..., 0, 1:] = -om
        g[..., 1:, 0] = -om
        g[..., 1:, 1:] = -g0
        return g

    def tensor_and_derivs(self, t, x, tau, v):
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        shape = v.shape[:-1]
        x = np.broadcast_to(x, shape + x.shape[-1:])
        F = self.finsler
        p = F.params(x, t)
        g = self._matrix(*F.cone(p))
        m = g.shape[-1]
        dg = np.zeros((m,) + g.shape)
        if F.homogeneous:
            return g, dg
        dp = F.param_derivs(x, t)
        rows = range(m) if F.time_dependent else range(1, m)
        for r in rows:
            pc = {k: (val + 1j * _CSTEP * dp[k][r] if k in dp else val) for k, val in p.items()}
            dg[r] = self._matrix(*F.cone(pc)).imag / _CSTEP
        return g, dg

    def check_signature(self, t, x):
        Lam, om, g0 = self._cone(t, x)
        norm2 = np.einsum("...i,...i->...", om, np.linalg.solve(g0, om[..., None])[..., 0])
        if np.any(Lam + norm2 <= 0):
            raise SignatureViolation("Lam + ||omega||^2 <= 0: metric is not Lorentzian")

    def null_scale(self, t, x, xdot):
        Lam, om, g0 = self._cone(t, x)
        q = _qf(g0, xdot, xdot)
        w = np.einsum("...i,...i->...", om, xdot)
        root = np.sqrt(np.maximum(w * w + Lam * q, 0.0))
        s1 = Lam / (w + root)  # = (-w + root) / q, cancellation-free
        s2 = (-w - root) / q
        return np.where(np.abs(s1 - 1) <= np.abs(s2 - 1), s1, s2)

    def lifts(self, t, x, d):
        d = np.asarray(d, float)
        Lam, om, g0 = (np.asarray(a) for a in self._cone(t, x))
        mem = cone_membership(Lam, om, g0, d)
        out = []
        if mem == INTERIOR or mem == BOUNDARY:
            out.append(SpacetimeVector(float(self.finsler._cost(self.finsler.params(np.asarray(x, float), t), d, "Z")), d, t, x))
            if Lam < 0 and mem == INTERIOR:
                out.append(SpacetimeVector(float(self.finsler._cost(self.finsler.params(np.asarray(x, float), t), d, "Zl")), d, t, x))
        return out

    def _centre_radius(self, t, x):
        Lam, om, g0 = self._cone(t, x)
        sharp = np.linalg.solve(g0, om[..., None])[..., 0]
        R = np.sqrt(Lam + np.einsum("...i,...i->...", om, sharp))
        return -sharp, R, np.linalg.cholesky(g0)

    def cone_point(self, t, x, phi):
        phi = np.asarray(phi, float)
        x = np.asarray(x, float)
        c, R, L = self._centre_radius(t, x)
        d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        LT = np.swapaxes(L, -1, -2)
        LT = np.broadcast_to(LT, d.shape[:-1] + LT.shape[-2:])
        u = np.linalg.solve(LT, d[..., None])[..., 0]
        return c + R[..., None] * u

    def cone_angle(self, t, x, v):
        c, R, L = self._centre_radius(t, x)
        y = np.einsum("...ji,...j->...i", L, np.asarray(v, float) - c)
        return np.arctan2(y[..., 1], y[..., 0])

    def orthogonal_closed_form(self, t, x, e):
        return _cone_orthogonal(*self._cone(t, x), e)


def _cone_orthogonal(Lam, om, g0, e):
    """Both lightlike (1, v) with g((1, v), (0, e)) = 0 for the quadratic cone.

    Lightlike means |v - c|_g0 = R with c = -g0^{-1} omega; orthogonality means
    g0(v - c, e) = 0, so v = c +/- R nu with nu the g0-unit g0-normal of e.
    """
    e = np.asarray(e, float)
    sharp = np.linalg.solve(g0, om)
    c = -sharp
    R = np.sqrt(Lam + om @ sharp)
    J = np.array([e[1], -e[0]])  # Euclidean normal of e
    nu = np.linalg.solve(g0, J)
    nu = nu / np.sqrt(nu @ g0 @ nu)
    return [c + R * nu, c - R * nu]


# -- constructors and conversions ---------------------------------------------


def sstk_from_zermelo(nav) -> SSTKMetric:
    """g0 = h, omega = -h(W, .), Lam = 1 - h(W, W); normalised so Lam + ||omega||^2 = 1."""
    if isinstance(nav, NavigationData):
        b = _mv(nav.h, nav.W)
        return SSTKMetric(1.0 - np.einsum("...i,...i->...", b, nav.W), -b, nav.h)
    if isinstance(nav, ZermeloMetric):
        return SSTKMetric(_ConeComponent(nav, 0), _ConeComponent(nav, 1), _ConeComponent(nav, 2))
    raise TypeError("expected NavigationData or ZermeloMetric")


def zermelo_from_sstk(sstk: SSTKMetric, x=None, t=0.0) -> NavigationData:
    """Navigation data of the conformal class: h = g0 / (Lam + ||omega||^2), W = -g0^{-1} omega."""
    x = np.zeros(sstk.omega.shape) if x is None else x
    return sstk.projected().navigation(x, t)


def fermat_from_sstk(sstk: SSTKMetric, x=None, t=0.0):
    """Fermat metrics (F, F_l); F_l is None when Lam >= 0 at the sample point(s)."""
    x = np.zeros(sstk.omega.shape) if x is None else np.asarray(x, float)
    sstk.check_signature(x, t)
    Lam = sstk.Lam(x, t)
    F = sstk.projected("Z")
    Fl = sstk.projected("Zl") if np.any(Lam < 0) or not sstk.Lam.constant else None
    return F, Fl


class _ConeComponent(Field):
    """One of (Lam, omega, g0) derived from a quadratic-cone metric's fields."""

    def __init__(self, metric: QuadraticConeMetric, index):
        self.metric = metric
        self.index = index
        n = metric.n
        self.shape = [(), (n,), (n, n)][index]
        self.constant = metric.homogeneous
        self.time_dependent = metric.time_dependent
        self.bounds = metric.bounds

    def __call__(self, x, t):
        return self.metric.cone(self.metric.params(np.asarray(x, float), t))[self.index]

    def derivatives(self, x, t):
        x = np.asarray(x, float)
        p = self.metric.params(x, t)
        dp = self.metric.param_derivs(x, t)
        out = []
        for r in range(x.shape[-1] + 1):
            pc = {k: (val + 1j * _CSTEP * dp[k][r] if k in dp else val) for k, val in p.items()}
            out.append(np.imag(self.metric.cone(pc)[self.index]) / _CSTEP * np.ones(x.shape[:-1] + self.shape))
        return np.stack(out)


def spacetime_for(spec: FinslerMetric, mode="auto") -> SpacetimeMetric:
    """Spacetime used to propagate fronts for ``spec``.

    ``auto`` picks the quadratic SSTK form for every quadratic-cone metric
    (smooth for all wind regimes) and the Lorentz-Finsler form otherwise.
    """
    if isinstance(spec, SpacetimeMetric):
        return spec
    if isinstance(spec, SSTKMetric):
        return SSTKSpacetime(spec)
    if mode == "finsler":
        return LorentzFinslerSpacetime(spec)
    if mode == "sstk" or (mode == "auto" and isinstance(spec, QuadraticConeMetric)):
        return SSTKSpacetime(spec)
    return LorentzFinslerSpacetime(spec)


# -- module-level operations ---------------------------------------------------


def eval_G(metric: SpacetimeMetric, p, u):
    """G(u) at the spacetime point ``p = (t, x)``; ``u = (tau, v)`` or a SpacetimeVector."""
    t, x = p
    tau, v = (u.tau, u.v) if isinstance(u, SpacetimeVector) else (u[0], u[1])
    out = metric.G(t, x, tau, v)
    return float(out) if np.ndim(out) == 0 else out


def fundamental_tensor_G(metric: SpacetimeMetric, p, u):
    t, x = p
    tau, v = (u.tau, u.v) if isinstance(u, SpacetimeVector) else (u[0], u[1])
    return metric.tensor(t, x, tau, v)


def christoffel(metric: SpacetimeMetric, p, u):
    t, x = p
    tau, v = (u.tau, u.v) if isinstance(u, SpacetimeVector) else (u[0], u[1])
    return metric.christoffel(t, x, tau, v)


def lightlike_lift(metric: SpacetimeMetric, p, d):
    """Future lightlike vectors (tau, d) over the spatial direction ``d`` (0, 1 or 2)."""
    t, x = p
    if not np.any(np.asarray(d, float)):
        raise ValueError("direction must be nonzero")
    return metric.lifts(t, x, d)
