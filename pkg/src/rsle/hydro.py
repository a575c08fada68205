"""Hydrodynamic-limit maps, densities and hull-boundary curves.

All times here are on the hydrodynamic scale (critical time 1). The limit
measure starts from a point mass at 1; ``M_t`` is its circular Stieltjes
transform, ``h_t`` straightens the characteristics and ``Omega_t`` maps
back, so that ``g_t = Omega_t o h_t``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    BranchAmbiguity,
    ConvergenceError,
    DomainError,
    FitError,
    QuadratureError,
    SingularEvaluation,
)
from .special import lambert_w0, solve_extents

__all__ = [
    "Topology",
    "Membership",
    "HullCurve",
    "CriticalAngles",
    "EdgeFit",
    "m0",
    "stieltjes_limit",
    "map_h",
    "map_omega",
    "g_inf",
    "g_inf_direct",
    "density",
    "boundary_gamma",
    "boundary_gamma_tilde",
    "critical_angles",
    "domain_membership",
    "topology",
    "edge_fit",
    "edge_coefficient",
    "gamma_point",
    "boundary_stieltjes",
    "density_mass",
    "hydro_invariant",
    "curve_to_csv",
    "density_to_csv",
    "write_svg",
]

NEWTON_TOL = 1e-14
RESIDUAL_TOL = 1e-10
DEFAULT_GEOM_TOL = 1e-6
DEFAULT_EDGE_TOL = 1e-9
DEFAULT_FIT_WINDOW = (1e-6, 1e-4)


class Topology(Enum):
    DISK = "Disk"
    CRITICAL = "Critical"
    ANNULUS = "Annulus"


class Membership(Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class HullCurve:
    """Upper half of a symmetric boundary curve.

    ``param`` is ``x`` for ``gamma`` and the radius ``r`` for
    ``gamma_tilde``; samples run from the outer endpoint to the inner one.
    """

    param: np.ndarray
    points: np.ndarray
    endpoint_out: complex
    endpoint_in: complex
    kind: str
    t: float

    def closed(self) -> np.ndarray:
        """The curve together with its conjugate, outer end to outer end."""
        return np.concatenate([self.points, np.conj(self.points[-2::-1])])


@dataclass(frozen=True)
class CriticalAngles:
    theta_c: Optional[float]
    varphi_c: Optional[float]
    phi_c: Optional[float]


@dataclass(frozen=True)
class EdgeFit:
    exponent: float
    coefficient: float
    fit_window: Tuple[float, float]
    residual: float
    n_points: int


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return complex(arr.reshape(-1)[0]) if scalar else arr


def m0(z):
    """``(1 + z)/(1 - z)``, the transform of the point mass at 1."""
    zz, scalar = _as_complex(z)
    if np.any(zz == 1.0):
        raise SingularEvaluation("m0 is singular at z = 1")
    return _ret((1.0 + zz) / (1.0 - zz), scalar)


def map_omega(t: float, z):
    """``Omega_t(z) = z exp(2t (1 + z)/(1 - z))``."""
    zz, scalar = _as_complex(z)
    if np.any(zz == 1.0):
        raise SingularEvaluation("map_omega is singular at z = 1")
    return _ret(zz * np.exp(2.0 * t * (1.0 + zz) / (1.0 - zz)), scalar)


def _lambda(t: float, z: np.ndarray) -> np.ndarray:
    return 4.0 * t * z / (1.0 - z) ** 2


def _h_parts(t: float, z: np.ndarray):
    """Return ``(h, s)`` with ``s = sqrt(1 + W/t)``."""
    if np.any(z == 1.0):
        raise DomainError("z = 1 is never in the domain for t > 0")
    w = np.asarray(lambert_w0(_lambda(t, z) * math.exp(-t)), dtype=complex)
    u = w / t
    s = np.sqrt(1.0 + u)
    # h = 1 + (2t/W)(1 - s) rewritten without cancellation
    h = u / (1.0 + s) ** 2
    return h, s


def map_h(t: float, z):
    """Straightening map ``h_t`` on the limit domain.

    ``h = 1 + (2t/W)(1 - sqrt(1 + W/t))`` with ``W = W0(Lambda_t(z) e^{-t})``,
    evaluated as ``u/(1 + sqrt(1 + u))^2``, ``u = W/t``, which is exact at
    ``z = 0`` and free of cancellation for small ``W``.

    Raises
    ------
    DomainError
        If ``|h| >= 1`` or ``|Omega_t(h)| >= 1``; together these hold
        exactly when ``z`` is outside the limit domain.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    zz, scalar = _as_complex(z)
    if t == 0:
        return _ret(zz.copy(), scalar)
    h, s = _h_parts(t, zz)
    if np.any(np.abs(h) >= 1.0):
        raise DomainError("z lies outside the limit domain (|h_t(z)| >= 1)")
    if np.any(np.abs(h * np.exp(2.0 * t * s)) >= 1.0):
        raise DomainError("z lies outside the limit domain (|g_t(z)| >= 1)")
    return _ret(h, scalar)


def g_inf(t: float, z):
    """Limit Loewner map ``g_t = Omega_t o h_t``."""
    if t == 0:
        return map_h(0.0, z)
    return map_omega(t, map_h(t, z))


def g_inf_direct(t: float, z):
    """Single closed form ``[1 + (2t/W)(1 - s)] e^{2ts}``, ``s = sqrt(1 + W/t)``."""
    zz, scalar = _as_complex(z)
    if t == 0:
        return _ret(zz.copy(), scalar)
    h, s = _h_parts(t, zz)
    return _ret(h * np.exp(2.0 * t * s), scalar)


def _newton_m(t, z, m, max_iter=50):
    """Newton on ``F(M) = (M - 1) e^{2tM} - z (M + 1)``; vectorized."""
    for _ in range(max_iter):
        e = np.exp(2.0 * t * m)
        f = (m - 1.0) * e - z * (m + 1.0)
        fp = e * (1.0 + 2.0 * t * (m - 1.0)) - z
        dm = f / fp
        m = m - dm
        if np.all(np.abs(dm) <= NEWTON_TOL * (1.0 + np.abs(m))):
            return m, True
    return m, False


def _residual_m(t, z, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(z * np.exp(-2.0 * t * m) * (m + 1.0) / (m - 1.0) - 1.0)
    return np.where(z == 0, 0.0, r)


def stieltjes_limit(t: float, z, seed_guess=None, max_halvings: int = 30):
    """Limit transform ``M_t(z)`` on the characteristics branch.

    Solves ``z = e^{2tM}(M - 1)/(M + 1)`` by Newton continuation in time
    from ``M_0(z)`` with an Euler predictor. A continuation step whose
    Newton solution strays further than the predicted move is halved;
    failing that ``max_halvings`` times raises :class:`BranchAmbiguity`.
    ``seed_guess`` skips the continuation and polishes a user seed.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    zz, scalar = _as_complex(z)
    zf = zz.reshape(-1)
    out = np.ones(zf.shape, dtype=complex)
    nz = zf != 0
    zc = zf[nz]
    if zc.size:
        if np.any(zc == 1.0):
            raise SingularEvaluation("M_t is singular at z = 1")
        if seed_guess is not None:
            m, ok = _newton_m(t, zc, np.broadcast_to(np.asarray(seed_guess, dtype=complex), zc.shape).copy())
            if not ok:
                raise ConvergenceError("Newton did not converge from seed_guess")
        else:
            m = (1.0 + zc) / (1.0 - zc)
            s, ds, halvings = 0.0, t / 16.0, 0
            while s < t:
                step = min(ds, t - s)
                e = np.exp(2.0 * s * m)
                fm = e * (1.0 + 2.0 * s * (m - 1.0)) - zc
                dmdt = -2.0 * m * (m - 1.0) * e / fm
                pred = m + step * dmdt
                cand, ok = _newton_m(s + step, zc, pred.copy())
                move = np.abs(step * dmdt)
                if ok and np.all(np.abs(cand - pred) <= 0.5 * move + 1e-8 * (1.0 + np.abs(m))):
                    m, s = cand, s + step
                    ds = min(2.0 * step, t / 4.0)
                    halvings = 0
                else:
                    halvings += 1
                    if halvings > max_halvings:
                        raise BranchAmbiguity(f"continuation of M_t stalled at s={s:.6g}")
                    ds = step / 2.0
        if np.any(_residual_m(t, zc, m) > RESIDUAL_TOL):
            raise ConvergenceError("M_t residual above tolerance")
        out[nz] = m
    return _ret(out.reshape(zz.shape), scalar)


def critical_angles(t: float) -> CriticalAngles:
    """Edge angles of ``gamma~_t``, ``gamma_t`` and of the support of ``mu_t``."""
    if not t > 0:
        raise DomainError("t must be > 0")
    if t > 1:
        return CriticalAngles(None, None, None)
    theta = math.acos(1.0 - 2.0 * t)
    varphi = math.acos(max(-1.0, 1.0 - 2.0 * t * math.exp(1.0 - t)))
    phi = theta + 2.0 * math.sqrt(t * (1.0 - t))
    return CriticalAngles(theta, varphi, phi)


def topology(t: float) -> Topology:
    if not t > 0:
        raise DomainError("t must be > 0")
    if t < 1:
        return Topology.DISK
    if t == 1:
        return Topology.CRITICAL
    return Topology.ANNULUS


class _DensityBranch:
    """Boundary values ``M_t(e^{i phi})`` continued in ``phi`` from 0.

    Nodes are cached so repeated quadrature calls stay cheap.
    """

    MAX_STEP = 0.02

    def __init__(self, t: float, edge_tol: float):
        self.t = t
        self.edge_tol = edge_tol
        self.edge = critical_angles(t).phi_c if t <= 1 else None
        m_start = self._real_root()
        self.phis = [0.0]
        self.ms = [complex(m_start)]

    def _real_root(self) -> float:
        t = self.t
        f = lambda m: (m - 1.0) * math.exp(2.0 * t * m) - (m + 1.0)
        hi = 2.0
        while f(hi) <= 0:
            hi *= 2.0
        return brentq(f, 1.0, hi, xtol=1e-15, rtol=1e-15)

    def _newton(self, phi, m):
        t = self.t
        z = complex(math.cos(phi), math.sin(phi))
        for _ in range(60):
            e = np.exp(2.0 * t * m)
            f = (m - 1.0) * e - z * (m + 1.0)
            fp = e * (1.0 + 2.0 * t * (m - 1.0)) - z
            dm = f / fp
            m -= dm
            if abs(dm) <= NEWTON_TOL * (1.0 + abs(m)):
                return m, True
        return m, False

    def _march(self, phi: float, m: complex, target: float, store: bool) -> complex:
        """Predictor-corrector continuation from ``(phi, m)`` up to ``target``."""
        t = self.t
        while phi < target:
            step = min(self.MAX_STEP, target - phi)
            if self.edge is not None:
                step = min(step, max(0.25 * (self.edge - phi), 1e-15))
            # tangent predictor dM/dphi = -F_phi / F_M
            z = complex(math.cos(phi), math.sin(phi))
            e = np.exp(2.0 * t * m)
            fm = e * (1.0 + 2.0 * t * (m - 1.0)) - z
            dm = 1j * z * (m + 1.0) / fm
            for _ in range(40):
                nxt = min(phi + step, target)
                cand, ok = self._newton(nxt, m + (nxt - phi) * dm)
                if ok and abs(cand - m) <= 4.0 * abs((nxt - phi) * dm) + 1e-12:
                    break
                step *= 0.5
            else:
                raise ConvergenceError(f"density continuation failed at phi={phi:.6g}")
            phi, m = nxt, cand
            if store:
                self.phis.append(phi)
                self.ms.append(m)
        return m

    def value(self, phi: float) -> complex:
        a = abs(phi)
        if self.edge is not None and a >= self.edge - self.edge_tol:
            return 0j
        if a > self.phis[-1]:
            self._march(self.phis[-1], self.ms[-1], a, store=True)
        k = int(np.searchsorted(self.phis, a, side="right") - 1)
        m = self.ms[k] if self.phis[k] == a else self._march(self.phis[k], self.ms[k], a, store=False)
        return complex(m.real, math.copysign(m.imag, phi) if phi != 0 else m.imag)


_BRANCH_CACHE: dict = {}


def _branch(t: float, edge_tol: float) -> _DensityBranch:
    key = (float(t), float(edge_tol))
    br = _BRANCH_CACHE.get(key)
    if br is None:
        if len(_BRANCH_CACHE) > 32:
            _BRANCH_CACHE.clear()
        br = _BRANCH_CACHE[key] = _DensityBranch(t, edge_tol)
    return br


def boundary_stieltjes(t: float, phi):
    """One-sided boundary value ``M_t(e^{i phi})`` from inside the disk."""
    br = _branch(t, DEFAULT_EDGE_TOL)
    arr = np.asarray(phi, dtype=float)
    wrapped = np.angle(np.exp(1j * arr))
    out = np.array([br.value(p) for p in wrapped.reshape(-1)])
    return complex(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def density(t: float, phi, edge_tol: float = DEFAULT_EDGE_TOL):
    """Density ``rho_t(e^{i phi}) = Re M_t(e^{i phi}) / (2 pi)``.

    Zero outside the support arc for ``t < 1``; within ``edge_tol`` of an
    edge the edge value 0 is returned.
    """
    if not t > 0:
        raise DomainError("density needs t > 0")
    br = _branch(t, edge_tol)
    arr = np.asarray(phi, dtype=float)
    wrapped = np.angle(np.exp(1j * arr.reshape(-1)))
    # visit angles in increasing |phi| so the continuation only moves forward
    order = np.argsort(np.abs(wrapped))
    out = np.empty(wrapped.size)
    for k in order:
        out[k] = max(br.value(wrapped[k]).real, 0.0) / (2.0 * math.pi)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def _support_limits(t: float) -> float:
    return critical_angles(t).phi_c if t < 1 else math.pi


def density_mass(t: float) -> float:
    """``int rho_t`` by adaptive quadrature (the result should be 1)."""
    a = _support_limits(t)
    val, err = quad(lambda p: density(t, p), 0.0, a, limit=400, epsabs=1e-12, epsrel=1e-12)
    return 2.0 * val


def _cheb(lo: float, hi: float, n: int) -> np.ndarray:
    k = np.arange(n)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(math.pi * k / max(n - 1, 1)))


def _sample_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Chebyshev nodes, 4x denser in the 10% next to each end.

    Log-spaced nodes down to ``1e-9`` of the span are added at both ends so
    the edge power laws can be resolved.
    """
    span = hi - lo
    extra = max(int(0.4 * n), 4)
    geo = span * np.logspace(-9.0, -1.0, 64)
    parts = [_cheb(lo, hi, n), _cheb(lo, lo + 0.1 * span, extra), _cheb(hi - 0.1 * span, hi, extra),
             lo + geo, hi - geo]
    return np.unique(np.concatenate(parts))


def _u_of_x(x: np.ndarray) -> np.ndarray:
    """``x / sinh x`` with a series near 0."""
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small] ** 2
    out[small] = 1.0 - xs / 6.0 + 7.0 * xs**2 / 360.0 - 31.0 * xs**3 / 15120.0
    xb = x[~small]
    out[~small] = xb / np.sinh(xb)
    return out


def _ycoth_minus_one(y: np.ndarray) -> np.ndarray:
    """``y coth y - 1`` with a series near 0."""
    out = np.empty_like(y)
    small = np.abs(y) < 0.1
    y2 = y[small] ** 2
    out[small] = y2 * (1.0 / 3.0 + y2 * (-1.0 / 45.0 + y2 * (2.0 / 945.0 - y2 / 4725.0)))
    yb = y[~small]
    out[~small] = yb / np.tanh(yb) - 1.0
    return out


def _delta(t: float, x: np.ndarray) -> np.ndarray:
    """``pi/2 - psi_t(x)`` from whichever closed form is well conditioned.

    ``sin(delta) = sqrt((x/2t) coth(x/2) - 1) sinh(x/2)`` near the outer end
    and ``cos(delta) = sqrt(1 - (x/2t) tanh(x/2)) cosh(x/2)`` near ``x_max``;
    they meet at ``delta = pi/4``.
    """
    y = 0.5 * x
    c_arg = np.maximum((_ycoth_minus_one(y) + (1.0 - t)) / t, 0.0)
    sd = np.sqrt(c_arg) * np.sinh(y)
    s_arg = np.maximum((t - y * np.tanh(y)) / t, 0.0)
    cd = np.sqrt(s_arg) * np.cosh(y)
    use_sin = sd <= math.sqrt(0.5)
    return np.where(use_sin, np.arcsin(np.minimum(sd, 1.0)), np.arccos(np.minimum(cd, 1.0)))


def _psi(t: float, x: np.ndarray) -> np.ndarray:
    return 0.5 * math.pi - _delta(t, x)


def gamma_point(t: float, x, delta: Optional[np.ndarray] = None) -> np.ndarray:
    """``gamma_t^+(x) = exp(Phi_t(x))``.

    Writing the arcsinh argument as ``-v`` with ``v = -i rho e^{i beta}``,
    ``gamma = 1/(v + sqrt(v^2 + 1))^2`` where ``v^2 + 1`` is formed with
    ``expm1`` and the root is taken with ``|v + root| >= 1`` (inside the
    disk). This stays accurate at the branch point reached at ``t = 1``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = _u_of_x(x)
    d = _delta(t, x) if delta is None else delta
    log_rho = 0.5 * (math.log(t) - t - np.log(u)) + 0.5 * u * np.cos(2.0 * d)
    beta = d - 0.5 * u * np.sin(2.0 * d)
    v = -1j * np.exp(log_rho + 1j * beta)
    q = -np.expm1(2.0 * log_rho + 2j * beta)
    r = np.sqrt(q)
    r = np.where(np.abs(v + r) >= np.abs(v - r), r, -r)
    return 1.0 / (v + r) ** 2


def boundary_gamma(t: float, n_samples: int = 512) -> HullCurve:
    """Upper boundary curve ``gamma_t^+`` of the limit hull."""
    if not t > 0 or not math.isfinite(t):
        raise DomainError("boundary_gamma needs t > 0")
    if n_samples < 8:
        raise DomainError("n_samples must be >= 8")
    ext = solve_extents(t)
    lo = 0.0 if t <= 1 else ext.x_min
    x = _sample_grid(lo, ext.x_max, n_samples)
    d = _delta(t, x)
    # the end parameters are roots; pin psi to its exact end values there
    d[-1] = 0.5 * math.pi
    d[0] = 0.0
    pts = gamma_point(t, x, d)
    pts.imag = np.maximum(pts.imag, 0.0)
    # real-axis endpoints are exact; drop round-off in their imaginary parts
    pts[-1] = pts[-1].real
    if t > 1:
        pts[0] = pts[0].real
    return HullCurve(param=x, points=pts, endpoint_out=complex(pts[0]), endpoint_in=complex(pts[-1]),
                     kind="gamma", t=float(t))


def _sinhc_minus_one(s: np.ndarray) -> np.ndarray:
    """``sinh(s)/s - 1`` with a series near 0."""
    out = np.empty_like(s)
    small = np.abs(s) < 1e-2
    s2 = s[small] ** 2
    out[small] = s2 * (1.0 / 6.0 + s2 * (1.0 / 120.0 + s2 / 5040.0))
    sb = s[~small]
    out[~small] = np.sinh(sb) / sb - 1.0
    return out


def _tilde_angle(t: float, s: np.ndarray) -> np.ndarray:
    """``arccos F_t(e^{-s})`` without cancellation near either end.

    In ``s = -log r``, ``F_t = 1 - 2t + 2 sinh^2(s/2) - 2t (sinh(s)/s - 1)``,
    so ``1 - F`` and ``1 + F`` are formed directly and the angle comes from
    the half-angle arcsine forms.
    """
    extra = 2.0 * np.sinh(0.5 * s) ** 2 - 2.0 * t * _sinhc_minus_one(s)
    one_minus = np.maximum(2.0 * t - extra, 0.0)
    one_plus = np.maximum(2.0 - 2.0 * t + extra, 0.0)
    lower = one_plus < one_minus
    return np.where(
        lower,
        math.pi - 2.0 * np.arcsin(np.minimum(np.sqrt(0.5 * one_plus), 1.0)),
        2.0 * np.arcsin(np.minimum(np.sqrt(0.5 * one_minus), 1.0)),
    )


def boundary_gamma_tilde(t: float, n_samples: int = 512) -> HullCurve:
    """Upper half of ``gamma~_t = {r e^{i arccos F_t(r)}}``."""
    if not t > 0 or not math.isfinite(t):
        raise DomainError("boundary_gamma_tilde needs t > 0")
    if n_samples < 8:
        raise DomainError("n_samples must be >= 8")
    ext = solve_extents(t)
    hi = 1.0 if t <= 1 else ext.r_max
    # sample in s = -log r: uniform resolution in the angle near both ends
    s = _sample_grid(-math.log(hi) if hi < 1 else 0.0, -math.log(ext.r_min), n_samples)[::-1]
    r = np.exp(-s)
    theta = _tilde_angle(t, s)
    r[0] = ext.r_min
    theta[0] = 0.0
    pts = r * np.exp(1j * theta)
    # order from the outer end to the inner end
    pts, r = pts[::-1], r[::-1]
    if t <= 1:
        out = complex(np.exp(1j * math.acos(1.0 - 2.0 * t)))
    else:
        out = complex(-ext.r_max)
    return HullCurve(param=r, points=pts, endpoint_out=out, endpoint_in=complex(ext.r_min),
                     kind="gamma_tilde", t=float(t))


def _domain_polygon(t: float, n_samples: int) -> np.ndarray:
    """Closed polygon bounding the component of the disk minus gamma_t containing 0."""
    curve = boundary_gamma(t, n_samples)
    loop = curve.closed()
    if t < 1:
        a = math.atan2(curve.endpoint_out.imag, curve.endpoint_out.real)
        arc = np.exp(1j * np.linspace(-a, -(2.0 * math.pi - a), max(n_samples // 2, 64)))
        loop = np.concatenate([loop, arc[1:-1]])
    return loop


def _point_segment_distance(z: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1)
    ab = b - a
    denom = np.maximum(np.abs(ab) ** 2, 1e-300)
    s = np.clip(((z[:, None] - a) * np.conj(ab)).real / denom, 0.0, 1.0)
    return np.abs(z[:, None] - (a + s * ab)).min(axis=1)


def _inside_polygon(z: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray crossing along +x."""
    x, y = z.real[:, None], z.imag[:, None]
    a, b = poly, np.roll(poly, -1)
    ya, yb = a.imag, b.imag
    cond = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a.real + (y - ya) * (b.real - a.real) / (yb - ya)
    return (np.count_nonzero(cond & (x < xc), axis=1) % 2) == 1


def domain_membership(t: float, z, geom_tol: float = DEFAULT_GEOM_TOL, n_samples: int = 2048):
    """Classify points against the limit domain at hydrodynamic time ``t``.

    Returns a :class:`Membership` (or an object array of them).
    """
    zz, scalar = _as_complex(z)
    zf = zz.reshape(-1)
    if np.any(np.abs(zf) > 1.0 + 1e-15):
        raise DomainError("domain_membership needs |z| <= 1")
    res = np.empty(zf.shape, dtype=object)
    res[:] = [Membership.INSIDE] * zf.size
    if t == 0:
        mask = np.abs(zf - 1.0) <= geom_tol
        res[mask] = [Membership.BOUNDARY] * int(mask.sum())
    else:
        poly = _domain_polygon(t, n_samples)
        for mask, kind in ((~_inside_polygon(zf, poly), Membership.OUTSIDE),
                           (_point_segment_distance(zf, poly) <= geom_tol, Membership.BOUNDARY)):
            res[mask] = [kind] * int(mask.sum())
    return res[0] if scalar else res.reshape(zz.shape)


def edge_fit(curve: HullCurve, angle_c: Optional[float] = None,
             window: Tuple[float, float] = DEFAULT_FIT_WINDOW) -> EdgeFit:
    """Log-log fit of ``1 - R`` against ``angle_c - angle`` near the outer end.

    ``window`` gives the fitted range of ``angle_c - angle`` as fractions
    of ``angle_c``.
    """
    pts = curve.points
    ang = np.angle(pts)
    if angle_c is None:
        angle_c = float(np.angle(curve.endpoint_out)) if curve.endpoint_out.imag > 0 else math.pi
    lo, hi = window
    if not 0 < lo < hi < 1:
        raise FitError("window fractions must satisfy 0 < lo < hi < 1")
    d = angle_c - ang
    one_minus_r = 1.0 - np.abs(pts)
    sel = (d >= lo * angle_c) & (d <= hi * angle_c) & (one_minus_r > 0)
    if np.count_nonzero(sel) < 8:
        raise FitError(f"only {np.count_nonzero(sel)} samples in the fit window")
    X = np.log(d[sel])
    Y = np.log(one_minus_r[sel])
    A = np.stack([X, np.ones_like(X)], axis=1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    return EdgeFit(exponent=float(coef[0]), coefficient=float(math.exp(coef[1])),
                   fit_window=(lo * angle_c, hi * angle_c), residual=resid, n_points=int(np.count_nonzero(sel)))


def edge_coefficient(curve: HullCurve, exponent: float, angle_c: Optional[float] = None,
                     window: Tuple[float, float] = DEFAULT_FIT_WINDOW) -> float:
    """Least-squares coefficient with the exponent held fixed."""
    pts = curve.points
    ang = np.angle(pts)
    if angle_c is None:
        angle_c = float(np.angle(curve.endpoint_out)) if curve.endpoint_out.imag > 0 else math.pi
    d = angle_c - ang
    omr = 1.0 - np.abs(pts)
    sel = (d >= window[0] * angle_c) & (d <= window[1] * angle_c) & (omr > 0)
    if np.count_nonzero(sel) < 8:
        raise FitError("too few samples in the fit window")
    return float(math.exp(np.mean(np.log(omr[sel]) - exponent * np.log(d[sel]))))


def hydro_invariant(t: float, z, epsabs: float = 1e-11) -> float:
    """``-2 int arg(g_t(z) - x) mu_t(dx) + arg g_t(z)`` on continuous branches.

    With ``arg(g - e^{i phi}) = phi + pi + Arg(1 - g e^{-i phi})`` and the
    symmetry of ``mu_t`` the integral reduces to the principal ``Arg``
    term; ``arg g_t = arg h_t + 2t Im s`` follows the factorization.
    """
    z = complex(z)
    if t == 0:
        if z.imag == 0 and z.real >= 1:
            raise DomainError("z must lie in the disk")
        return -2.0 * (math.pi + np.angle(1.0 - z)) + math.atan2(z.imag, z.real)
    h, s = _h_parts(t, np.array([z]))
    h, s = complex(h[0]), complex(s[0])
    if abs(h) >= 1:
        raise DomainError("z lies outside the limit domain")
    g = h * np.exp(2.0 * t * s)
    arg_g = math.atan2(h.imag, h.real) + 2.0 * t * s.imag
    a = _support_limits(t)

    def integrand(p):
        return np.angle(1.0 - g * np.exp(-1j * p)) * density(t, p)

    val, err = quad(integrand, -a, a, limit=400, epsabs=epsabs, epsrel=1e-12, points=[0.0])
    if not math.isfinite(val) or err > 1e-7:
        raise QuadratureError(f"hydro_invariant quadrature error estimate {err:.3g}")
    return -2.0 * math.pi - 2.0 * val + arg_g


def curve_to_csv(curve: HullCurve, path) -> None:
    """Write ``param,re,im``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "re", "im"])
        for p, z in zip(curve.param, curve.points):
            w.writerow([repr(float(p)), repr(float(z.real)), repr(float(z.imag))])


def density_to_csv(phi: Sequence[float], rho: Sequence[float], path) -> None:
    """Write ``phi,rho``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "rho"])
        for p, r in zip(phi, rho):
            w.writerow([repr(float(p)), repr(float(r))])


def _svg_path(points: np.ndarray, scale: float = 100.0) -> str:
    cmds = [f"{'M' if k == 0 else 'L'}{p.real * scale:.4f},{-p.imag * scale:.4f}" for k, p in enumerate(points)]
    return " ".join(cmds)


def write_svg(path, curves: Sequence[HullCurve], mask_points: Optional[np.ndarray] = None,
              title: str = "") -> None:
    """Draw the unit circle, each curve with its conjugate, and optional hull cells.

    Presentation only; the CSV outputs are the normative data.
    """
    scale = 100.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- {title} viewport [-1.05,1.05]^2 stroke: circle #888 0.6, gamma #c0392b 0.8, "
        "gamma_tilde #2e86c1 0.8, hull cells #999 -->",
        '<svg xmlns="http://www.w3.org/2000/svg" width="420" height="420" viewBox="-105 -105 210 210">',
        '<circle cx="0" cy="0" r="100" fill="none" stroke="#888" stroke-width="0.6"/>',
    ]
    if mask_points is not None:
        for p in np.asarray(mask_points):
            lines.append(f'<circle cx="{p.real * scale:.3f}" cy="{-p.imag * scale:.3f}" r="0.6" fill="#999"/>')
    for c in curves:
        color = "#c0392b" if c.kind == "gamma" else "#2e86c1"
        lines.append(f'<path d="{_svg_path(c.closed(), scale)}" fill="none" stroke="{color}" stroke-width="0.8"/>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
