"""Finite-N radial multiple Loewner chain.

Tracked points follow ``dg/dt = -sum_i g (g + X_i)/(g - X_i)`` together
with ``d log g'/dt = sum_i 2 X_i^2/(g - X_i)^2 - N``. The continuous
branches of ``log g`` and ``log(g - X_i)`` are accumulated from exact
increments: with ``|g| < 1``,

    log(g - X_i) = i(theta_i + pi) + Log(1 - g exp(-i theta_i)) + 2 pi i k

and the principal ``Log`` never crosses its cut, so differences of the
right-hand side are exact branch-continuous increments.

Sub-steps are adaptive per point: each stays below ``frac`` times the
smaller of ``|g|`` and the distance to the nearest driving point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .dyson import DrivingPath, hermite
from .errors import DomainError, SingularEvaluation, StepFailure

__all__ = [
    "FlowPoint",
    "FlowArrays",
    "EvolveResult",
    "HullMask",
    "loewner_field",
    "evolve",
    "reverse_flow",
    "hull_mask",
]

DEFAULT_SWALLOW_EPS = 1e-4
_ORIGIN_SNAP = 1e-300
DEFAULT_FRAC = 0.1
DEFAULT_MAX_SUBSTEPS = 100_000


@dataclass(frozen=True)
class FlowPoint:
    """Loewner state of one tracked point (see module docstring for branches)."""

    z0: complex
    g: complex
    log_dg: complex
    log_g: complex
    log_diffs: np.ndarray
    swallowed_at: Optional[float] = None

    @property
    def swallowed(self) -> bool:
        return self.swallowed_at is not None


def loewner_field(g: np.ndarray, x: np.ndarray):
    """Vector field and log-derivative rate.

    Parameters
    ----------
    g : complex array, shape (E,)
    x : complex array, shape (N,) or (E, N)
        Driving points on the unit circle.

    Returns
    -------
    v : ``dg/dt``
    m : ``d log g'/dt``
    dist : ``min_i |g - x_i|``
    """
    d = g[:, None] - x
    r = x / d
    n = d.shape[-1]
    v = -g * (n + 2.0 * r.sum(axis=-1))
    m = 2.0 * (r * r).sum(axis=-1) - n
    return v, m, np.abs(d).min(axis=-1)


def _log_edge(g: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``Log(1 - g exp(-i theta))`` elementwise; ``g`` broadcast over angles."""
    return np.log1p(-g[:, None] * np.exp(-1j * theta))


class FlowArrays:
    """Mutable structure-of-arrays state for many tracked points.

    ``theta`` arguments are either shared (shape (N,)) or per element
    (shape (E, N)).
    """

    def __init__(self, z0: Sequence[complex], theta0: np.ndarray, swallow_eps: float = DEFAULT_SWALLOW_EPS,
                 edge_eps: float = 0.0):
        z = np.asarray(z0, dtype=complex).reshape(-1)
        if np.any(~np.isfinite(z)) or np.any(np.abs(z) >= 1.0):
            raise DomainError("tracked points must lie strictly inside the unit disk")
        # the flow cannot resolve |z| near the subnormal range; treat it as the fixed origin
        self.z0 = z
        z = np.where(np.abs(z) < _ORIGIN_SNAP, 0.0, z)
        theta0 = np.asarray(theta0, dtype=float)
        self.g = z.copy()
        self.log_dg = np.zeros_like(z)
        with np.errstate(divide="ignore"):
            self.log_g = np.log(z)
        th = np.broadcast_to(theta0, (z.size, theta0.shape[-1]))
        self.log_diffs = np.log(z[:, None] - np.exp(1j * th))
        self.swallowed_at = np.full(z.size, np.nan)
        self.swallow_eps = swallow_eps
        self.edge_eps = edge_eps
        dist = np.abs(z[:, None] - np.exp(1j * th)).min(axis=1)
        hit = dist <= swallow_eps
        self.swallowed_at[hit] = 0.0
        self.alive = ~hit

    @property
    def size(self) -> int:
        return self.g.size

    @staticmethod
    def _rows(theta: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return theta[idx] if theta.ndim == 2 else theta

    def jump(self, theta_old: np.ndarray, theta_new: np.ndarray) -> None:
        """Move the driving angles discontinuously; only ``log_diffs`` changes."""
        idx = np.flatnonzero(self.alive)
        if idx.size == 0:
            return
        a = self._rows(theta_old, idx)
        b = self._rows(theta_new, idx)
        g = self.g[idx]
        inc = 1j * (b - a) + _log_edge(g, b) - _log_edge(g, a)
        self.log_diffs[idx] += inc

    def advance(
        self,
        t0: float,
        span: float,
        theta: np.ndarray,
        theta_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        scheme: str = "euler",
        frac: float = DEFAULT_FRAC,
        max_substeps: int = DEFAULT_MAX_SUBSTEPS,
    ) -> None:
        """Integrate alive points over ``[t0, t0 + span]``.

        ``theta`` holds the angles at ``t0``. With ``theta_fn=None`` they are
        frozen over the interval; otherwise ``theta_fn(idx, tau)`` returns
        angles at offsets ``tau`` for elements ``idx`` and must return the
        exact endpoint angles at ``tau == span``.
        """
        if scheme not in ("euler", "rk4"):
            raise DomainError(f"unknown scheme {scheme!r}")
        idx = np.flatnonzero(self.alive)
        tau = np.zeros(idx.size)
        count = 0
        while idx.size:
            count += 1
            if count > max_substeps:
                raise StepFailure(f"more than {max_substeps} sub-steps near t={t0:.6g}")
            g = self.g[idx]
            th = self._rows(theta, idx) if theta_fn is None else theta_fn(idx, tau)
            x = np.exp(1j * th)
            v, m, dist = loewner_field(g, x)
            av = np.abs(v)
            rem = span - tau
            with np.errstate(divide="ignore", invalid="ignore"):
                hmax = np.where(av > 0, frac * (np.minimum(dist, np.abs(g)) / av), np.inf)
            finishing = hmax >= rem
            h = np.where(finishing, rem, hmax)
            tau_new = np.where(finishing, span, tau + h)

            if scheme == "euler":
                g_new = g + h * v
                dlog = h * m
                if theta_fn is None:
                    th_new, x_new = th, x
                else:
                    th_new = theta_fn(idx, tau_new)
                    x_new = np.exp(1j * th_new)
            else:
                if theta_fn is None:
                    xm = x_new = x
                    th_new = th
                else:
                    xm = np.exp(1j * theta_fn(idx, tau + 0.5 * h))
                    th_new = theta_fn(idx, tau_new)
                    x_new = np.exp(1j * th_new)
                k2, m2, _ = loewner_field(g + 0.5 * h * v, xm)
                k3, m3, _ = loewner_field(g + 0.5 * h * k2, xm)
                k4, m4, _ = loewner_field(g + h * k3, x_new)
                g_new = g + (h / 6.0) * (v + 2 * k2 + 2 * k3 + k4)
                dlog = (h / 6.0) * (m + 2 * m2 + 2 * m3 + m4)

            ag = np.abs(g_new)
            exited = ~(ag < 1.0)
            ok = ~exited
            # commit points that stayed inside the disk
            if np.any(ok):
                io = idx[ok]
                go, gn = g[ok], g_new[ok]
                tho = th if th.ndim == 1 else th[ok]
                thn = th_new if th_new.ndim == 1 else th_new[ok]
                nz = go != 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    dlg = np.where(nz, np.log(gn / np.where(nz, go, 1.0)), 0.0)
                self.log_g[io] += dlg
                self.log_dg[io] += dlog[ok]
                dth = thn - tho if thn.ndim == 2 else np.broadcast_to(thn - tho, (io.size, thn.size))
                self.log_diffs[io] += 1j * dth + _log_edge(gn, thn) - _log_edge(go, tho)
                self.g[io] = gn
            # swallow detection
            xn = x_new if x_new.ndim == 2 else x_new[None, :]
            dist_new = np.abs(g_new[:, None] - xn).min(axis=1)
            swallowed = exited | (dist_new <= self.swallow_eps)
            if self.edge_eps > 0:
                swallowed |= 1.0 - ag <= self.edge_eps * (1.0 - np.abs(self.z0[idx]))
            if np.any(swallowed):
                si = idx[swallowed]
                self.swallowed_at[si] = t0 + tau_new[swallowed]
                self.alive[si] = False
            keep = ~finishing & ~swallowed
            idx = idx[keep]
            tau = tau_new[keep]

    def snapshot(self) -> List[FlowPoint]:
        out = []
        for k in range(self.size):
            s = self.swallowed_at[k]
            out.append(
                FlowPoint(
                    z0=complex(self.z0[k]),
                    g=complex(self.g[k]),
                    log_dg=complex(self.log_dg[k]),
                    log_g=complex(self.log_g[k]),
                    log_diffs=self.log_diffs[k].copy(),
                    swallowed_at=None if np.isnan(s) else float(s),
                )
            )
        return out


@dataclass
class EvolveResult:
    """Final flow points plus per-grid-time trajectories.

    ``g``, ``log_dg`` and ``swallowed`` have shape (T, K) when recorded.
    """

    points: List[FlowPoint]
    times: np.ndarray
    g: Optional[np.ndarray] = None
    log_dg: Optional[np.ndarray] = None
    swallowed: Optional[np.ndarray] = None

    def trajectory_to_csv(self, path, k: int) -> None:
        """Write the ``t,re_g,im_g,re_logdg,im_logdg,swallowed`` CSV of point ``k``."""
        if self.g is None:
            raise DomainError("trajectories were not recorded")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_g", "im_g", "re_logdg", "im_logdg", "swallowed"])
            for j, t in enumerate(self.times):
                g, ld = self.g[j, k], self.log_dg[j, k]
                w.writerow([repr(float(t)), repr(g.real), repr(g.imag), repr(ld.real), repr(ld.imag),
                            int(self.swallowed[j, k])])


def _interval_fn(path: DrivingPath, k: int):
    """Hermite angle evaluator on path interval ``k`` (shared across elements)."""
    full = path.times[k + 1] - path.times[k]

    def fn(idx, tau):
        return hermite(path, k, np.minimum(tau, full))

    return fn


def _default_scheme(path: DrivingPath) -> str:
    return "rk4" if path.deterministic else "euler"


def evolve(
    points: Sequence[complex],
    path: DrivingPath,
    *,
    t_end: Optional[float] = None,
    scheme: Optional[str] = None,
    swallow_eps: float = DEFAULT_SWALLOW_EPS,
    edge_eps: float = 0.0,
    frac: float = DEFAULT_FRAC,
    record: bool = True,
    max_substeps: int = DEFAULT_MAX_SUBSTEPS,
) -> EvolveResult:
    """Run the Loewner flow for ``points`` along ``path`` up to ``t_end``.

    Parameters
    ----------
    scheme : {"euler", "rk4"}, optional
        Defaults to RK4 for deterministic paths and Euler otherwise. Paths
        with velocities are Hermite-interpolated; others are held at the
        left endpoint of each interval.
    swallow_eps : float
        A point is swallowed once it comes this close to a driving point
        or leaves the disk.
    edge_eps : float
        Optional extra criterion ``1 - |g| <= edge_eps * (1 - |z0|)``. Hulls of simple
        curves have no interior, so grid estimates need this to register
        the regions squeezed between curves.
    record : bool
        Keep ``g``, ``log_dg`` and swallow flags at every grid time.
    """
    t_end = path.horizon if t_end is None else float(t_end)
    if not 0.0 <= t_end <= path.horizon * (1 + 1e-12):
        raise DomainError(f"t_end={t_end} outside [0, {path.horizon}]")
    scheme = scheme or _default_scheme(path)
    hermite_on = path.velocities is not None
    fa = FlowArrays(points, path.states[0], swallow_eps=swallow_eps, edge_eps=edge_eps)

    times = [0.0]
    rec_g, rec_ld, rec_sw = [fa.g.copy()], [fa.log_dg.copy()], [~fa.alive]
    k = 0
    while k + 1 < len(path.times) and path.times[k] < t_end:
        a = path.times[k]
        b = min(path.times[k + 1], t_end)
        if k > 0 and not hermite_on:
            fa.jump(path.states[k - 1], path.states[k])
        fn = _interval_fn(path, k) if hermite_on else None
        fa.advance(a, b - a, path.states[k], theta_fn=fn, scheme=scheme, frac=frac, max_substeps=max_substeps)
        times.append(b)
        if record:
            rec_g.append(fa.g.copy())
            rec_ld.append(fa.log_dg.copy())
            rec_sw.append(~fa.alive)
        k += 1
    # align log_diffs with the state in force at t_end
    if not hermite_on and k < len(path.times) and path.times[k] == t_end and k > 0:
        fa.jump(path.states[k - 1], path.states[k])
    res = EvolveResult(points=fa.snapshot(), times=np.array(times))
    if record:
        res.g = np.array(rec_g)
        res.log_dg = np.array(rec_ld)
        res.swallowed = np.array(rec_sw)
    return res


def reverse_flow(
    target,
    path: DrivingPath,
    t: float,
    *,
    frac: float = DEFAULT_FRAC,
    max_substeps: int = DEFAULT_MAX_SUBSTEPS,
    eps: float = 1e-12,
):
    """Inverse map ``g_t^{-1}(target)`` by integrating the time-reversed flow.

    RK4 with adaptive sub-steps over each path interval, traversed from
    ``t`` back to 0; angles are frozen (stochastic paths) or Hermite
    interpolated (deterministic paths), matching :func:`evolve`.

    Raises
    ------
    SingularEvaluation
        The reversed trajectory meets a driving point or leaves the disk.
    """
    if not 0.0 <= t <= path.horizon * (1 + 1e-12):
        raise DomainError(f"t={t} outside path horizon")
    w = np.atleast_1d(np.asarray(target, dtype=complex)).copy()
    if np.any(np.abs(w) >= 1.0):
        raise DomainError("target must lie inside the unit disk")
    w[np.abs(w) < _ORIGIN_SNAP] = 0.0
    hermite_on = path.velocities is not None
    k = int(np.searchsorted(path.times, t, side="left")) - 1
    count = 0
    while k >= 0:
        span = min(path.times[k + 1], t) - path.times[k]

        def angles(off):
            if not hermite_on:
                return path.states[k]
            return hermite(path, k, np.clip(off, 0.0, span))

        idx = np.arange(w.size)
        s = np.zeros(w.size)  # elapsed reverse time within the interval
        while idx.size:
            count += 1
            if count > max_substeps:
                raise StepFailure("reverse flow exceeded sub-step budget")
            y = w[idx]
            off = span - s
            v, _, dist = loewner_field(y, np.exp(1j * angles(off)))
            if dist.min() < eps or np.any(np.abs(y) >= 1.0):
                raise SingularEvaluation("reverse flow hit a driving point or the circle")
            av = np.abs(v)
            with np.errstate(divide="ignore", invalid="ignore"):
                hmax = np.where(av > 0, frac * (np.minimum(dist, np.abs(y)) / av), np.inf)
            finishing = hmax >= off
            h = np.where(finishing, off, hmax)
            off1 = np.where(finishing, 0.0, off - h)
            xm = np.exp(1j * angles(off - 0.5 * h))
            x1 = np.exp(1j * angles(off1))
            k1 = -v
            k2 = -loewner_field(y + 0.5 * h * k1, xm)[0]
            k3 = -loewner_field(y + 0.5 * h * k2, xm)[0]
            k4 = -loewner_field(y + h * k3, x1)[0]
            w[idx] = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            keep = ~finishing
            idx = idx[keep]
            s = (span - off1)[keep]
        k -= 1
    if np.any(np.abs(w) >= 1.0):
        raise SingularEvaluation("reverse flow left the disk")
    return complex(w[0]) if np.ndim(target) == 0 else w.reshape(np.shape(target))


@dataclass
class HullMask:
    """Grid classification of ``D_t`` versus the hull ``K_t``.

    ``swallow_time`` is NaN for points inside the domain.
    """

    resolution: int
    t: float
    z: np.ndarray
    ij: np.ndarray
    swallow_time: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def inside(self) -> np.ndarray:
        return np.isnan(self.swallow_time)

    def boundary_points(self) -> np.ndarray:
        """Swallowed grid points with a 4-neighbour inside the domain."""
        res = self.resolution
        grid = np.zeros((res, res), dtype=np.int8)  # 0 outside disk, 1 inside, 2 hull
        grid[self.ij[:, 0], self.ij[:, 1]] = np.where(self.inside, 1, 2)
        pad = np.pad(grid, 1)
        nb_inside = np.zeros_like(grid, dtype=bool)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb_inside |= pad[1 + di : res + 1 + di, 1 + dj : res + 1 + dj] == 1
        hull = (grid == 2) & nb_inside
        sel = hull[self.ij[:, 0], self.ij[:, 1]]
        return self.z[sel]

    def to_csv(self, path) -> None:
        """Write ``re_z,im_z,swallow_time`` (empty time for interior points)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "swallow_time"])
            for z, s in zip(self.z, self.swallow_time):
                w.writerow([repr(z.real), repr(z.imag), "" if np.isnan(s) else repr(float(s))])


def hull_mask(
    resolution: int,
    path: DrivingPath,
    t: float,
    *,
    swallow_eps: float = DEFAULT_SWALLOW_EPS,
    edge_eps: float = 0.0,
    frac: float = DEFAULT_FRAC,
    chunk: int = 2048,
) -> HullMask:
    """Classify a ``resolution x resolution`` lattice on ``[-1, 1]^2`` (disk points only)."""
    if resolution < 16:
        raise DomainError("resolution must be >= 16")
    ax = np.linspace(-1.0, 1.0, resolution)
    ii, jj = np.meshgrid(np.arange(resolution), np.arange(resolution), indexing="ij")
    z = ax[jj] + 1j * ax[ii]
    sel = np.abs(z) < 1.0
    z = z[sel]
    ij = np.stack([ii[sel], jj[sel]], axis=1)
    st = np.full(z.size, np.nan)
    if t > 0:
        for lo in range(0, z.size, chunk):
            res = evolve(z[lo : lo + chunk], path, t_end=t, swallow_eps=swallow_eps, edge_eps=edge_eps,
                         frac=frac, record=False)
            st[lo : lo + chunk] = [np.nan if p.swallowed_at is None else p.swallowed_at for p in res.points]
    return HullMask(resolution=resolution, t=float(t), z=z, ij=ij, swallow_time=st,
                    meta={"swallow_eps": swallow_eps, "edge_eps": edge_eps})
