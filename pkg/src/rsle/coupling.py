"""Coupling observables of the multiple radial SLE with the free field.

The observable

    h_t(z) = -(2/sqrt(kappa)) sum_i arg(g - X_i) + xi_N arg g - chi arg g' + zeta sum_i Theta_i

is assembled from the continuous-branch logarithms carried by
:class:`rsle.loewner.FlowPoint`. Its increments are linear in four
components (``sum Im log(g - X_i)``, ``Im log g``, ``Im log g'``,
``sum Theta_i``), so Monte Carlo samples store those and any set of
constants can be applied afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .dyson import DrivingPath, path_streams, simulate_dyson_batch
from .errors import DomainError, SingularEvaluation, SwallowedError
from .loewner import DEFAULT_SWALLOW_EPS, FlowArrays, FlowPoint, evolve, reverse_flow

__all__ = [
    "CouplingConstants",
    "coupling_constants",
    "green_disk",
    "observable",
    "cluster_init",
    "MartingaleSamples",
    "MartingaleReport",
    "martingale_samples",
    "martingale_test",
    "QVReport",
    "quad_variation_test",
    "hadamard_check",
    "classical_invariant",
]

DEFAULT_BATCHES = 20
DEFAULT_MIN_FRACTION = 0.1
DEFAULT_CLUSTER_HALF_WIDTH = 0.7


@dataclass(frozen=True)
class CouplingConstants:
    kappa: float
    n: int
    xi_n: float
    chi: float
    zeta: float

    def shifted(self, xi: float = 0.0, chi: float = 0.0, zeta: float = 0.0) -> "CouplingConstants":
        """Copy with offsets added (negative controls)."""
        return CouplingConstants(self.kappa, self.n, self.xi_n + xi, self.chi + chi, self.zeta + zeta)

    def weights(self) -> np.ndarray:
        """Coefficients of the four observable components."""
        return np.array([-2.0 / math.sqrt(self.kappa), self.xi_n, -self.chi, self.zeta])


def coupling_constants(kappa: float, n: int) -> CouplingConstants:
    """``xi_N = (N+2)/sqrt(k) - sqrt(k)/2``, ``chi = 2/sqrt(k) - sqrt(k)/2``, ``zeta = 1/sqrt(k)``."""
    if not (kappa > 0) or not math.isfinite(kappa):
        raise DomainError(f"kappa must be positive, got {kappa}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    rk = math.sqrt(kappa)
    return CouplingConstants(
        kappa=float(kappa),
        n=int(n),
        xi_n=(n + 2) / rk - rk / 2.0,
        chi=2.0 / rk - rk / 2.0,
        zeta=1.0 / rk,
    )


def green_disk(z, w, eps: float = 1e-14):
    """Zero-boundary Green's function ``log |(z conj(w) - 1)/(z - w)|`` of the disk."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    d = np.abs(z - w)
    if np.any(d < eps):
        raise SingularEvaluation("green_disk is singular at z = w")
    out = np.log(np.abs(z * np.conj(w) - 1.0)) - np.log(d)
    return float(out) if out.ndim == 0 else out


def _components(log_diffs, log_g, log_dg, theta) -> np.ndarray:
    """Stack ``(sum Im log(g - X), Im log g, Im log g', sum theta)`` along the last axis."""
    return np.stack(
        [np.imag(log_diffs).sum(axis=-1), np.imag(log_g), np.imag(log_dg), np.sum(theta, axis=-1)],
        axis=-1,
    )


def observable(flow: FlowPoint, state: Sequence[float], consts: CouplingConstants) -> float:
    """Value of the coupling observable for one tracked point."""
    if flow.swallowed:
        raise SwallowedError(f"point {flow.z0} was swallowed at t={flow.swallowed_at}")
    theta = np.asarray(state, dtype=float)
    if theta.size != flow.log_diffs.size:
        raise DomainError("state size does not match the flow point")
    comp = _components(flow.log_diffs, flow.log_g, flow.log_dg, theta)
    return float(comp @ consts.weights())


def cluster_init(n: int, half_width: float = DEFAULT_CLUSTER_HALF_WIDTH) -> np.ndarray:
    """``n`` equally spaced angles on ``[-half_width, half_width]`` (``[0]`` for one particle)."""
    if n == 1:
        return np.zeros(1)
    return np.linspace(-half_width, half_width, n)


def _batch_means(x: np.ndarray, n_batches: int):
    """Mean and batch-means standard error of a 1-D sample."""
    m = x.size
    if m < n_batches or n_batches < 2:
        return float(np.mean(x)) if m else float("nan"), float("nan")
    parts = np.array_split(x, n_batches)
    means = np.array([p.mean() for p in parts])
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


def _flow_batch(z_grid: np.ndarray, times: np.ndarray, states: np.ndarray, swallow_eps: float,
                record_increments: bool = False, scheme: str = "euler"):
    """Evolve every grid point along every path on the shared time grid.

    Returns start and stop components, shape (P, Z, 4), the stop times
    (NaN when unswallowed) and, optionally, per-interval components
    (K, P, Z, 4).
    """
    p, k_total, n = states.shape
    zc = z_grid.size
    e = p * zc

    def rows(k):
        return np.repeat(states[:, k, :], zc, axis=0)

    fa = FlowArrays(np.tile(z_grid, p), rows(0), swallow_eps=swallow_eps)
    comp0 = _components(fa.log_diffs, fa.log_g, fa.log_dg, rows(0))
    stop_theta = rows(0).copy()
    trace = [comp0] if record_increments else None
    for k in range(k_total - 1):
        th = rows(k)
        if k > 0:
            fa.jump(states_prev, th)
        alive_before = fa.alive.copy()
        fa.advance(times[k], times[k + 1] - times[k], th, scheme=scheme)
        newly = alive_before & ~fa.alive
        stop_theta[newly] = th[newly]
        states_prev = th
        if record_increments:
            th_next = rows(k + 1)
            ld = fa.log_diffs.copy()
            live = fa.alive
            # align with the state at the right endpoint, as the jump will
            ld[live] += (1j * (th_next[live] - th[live])
                         + np.log1p(-fa.g[live, None] * np.exp(-1j * th_next[live]))
                         - np.log1p(-fa.g[live, None] * np.exp(-1j * th[live])))
            theta_now = np.where(live[:, None], th_next, stop_theta)
            trace.append(_components(ld, fa.log_g, fa.log_dg, theta_now))
    last = rows(k_total - 1)
    fa.jump(states_prev, last)
    live = fa.alive
    stop_theta[live] = last[live]
    comp1 = _components(fa.log_diffs, fa.log_g, fa.log_dg, stop_theta)
    out = (comp0.reshape(p, zc, 4), comp1.reshape(p, zc, 4), fa.swallowed_at.reshape(p, zc),
           fa.g.reshape(p, zc))
    if record_increments:
        out = out + (np.array(trace).reshape(k_total, p, zc, 4),)
    return out


@dataclass
class MartingaleSamples:
    """Per-path observable components at time 0 and at the stopping time."""

    n: int
    kappa: float
    z_grid: np.ndarray
    horizon: float
    dt: float
    seed: int
    start: np.ndarray
    stop: np.ndarray
    swallowed_at: np.ndarray
    min_fraction: float = DEFAULT_MIN_FRACTION

    @property
    def excluded(self) -> np.ndarray:
        """Paths whose point was swallowed before ``min_fraction * horizon``, shape (P, Z)."""
        return self.swallowed_at < self.min_fraction * self.horizon

    def report(self, consts: Optional[CouplingConstants] = None, n_batches: int = DEFAULT_BATCHES,
               threshold: float = 3.0) -> "MartingaleReport":
        consts = consts or coupling_constants(self.kappa, self.n)
        drift = (self.stop - self.start) @ consts.weights()
        excl = self.excluded
        points = []
        for j, z in enumerate(self.z_grid):
            keep = ~excl[:, j]
            mean, se = _batch_means(drift[keep, j], n_batches)
            points.append(
                {
                    "z": [float(z.real), float(z.imag)],
                    "mean": mean,
                    "se": se,
                    "n_paths": int(keep.sum()),
                    "excluded": int(excl[:, j].sum()),
                    "pass": bool(abs(mean) <= threshold * se),
                }
            )
        return MartingaleReport(
            n=self.n, kappa=self.kappa, constants=asdict(consts), horizon=self.horizon, dt=self.dt,
            seed=self.seed, threshold=threshold, points=points,
        )


@dataclass
class MartingaleReport:
    n: int
    kappa: float
    constants: dict
    horizon: float
    dt: float
    seed: int
    threshold: float
    points: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p["pass"] for p in self.points)

    @property
    def fail_fraction(self) -> float:
        return sum(not p["pass"] for p in self.points) / max(len(self.points), 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = "PASS" if self.passed else "FAIL"
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _check_kappa(kappa: float) -> float:
    if not (kappa > 0) or not math.isfinite(kappa):
        raise DomainError(f"kappa must be positive, got {kappa}")
    beta = 8.0 / kappa
    if beta < 1.0:
        raise DomainError(f"kappa={kappa} gives beta={beta} < 1; driving motions may collide")
    return beta


def martingale_samples(
    n: int,
    kappa: float,
    z_grid: Sequence[complex],
    horizon: float,
    paths: int,
    dt: float,
    seed: int,
    *,
    init: Optional[Sequence[float]] = None,
    swallow_eps: float = DEFAULT_SWALLOW_EPS,
    min_fraction: float = DEFAULT_MIN_FRACTION,
    block: int = 2000,
) -> MartingaleSamples:
    """Simulate ``paths`` driving paths and record the observable components.

    Each path is stopped at ``min(tau_z, horizon)`` per grid point. Paths
    are processed in blocks of ``block``; path ``k`` always uses the
    streams of index ``k``, so results do not depend on ``block``.
    """
    beta = _check_kappa(kappa)
    z = np.asarray(z_grid, dtype=complex).reshape(-1)
    init = cluster_init(n) if init is None else np.asarray(init, dtype=float)
    starts, stops, sw = [], [], []
    for lo in range(0, paths, block):
        m = min(block, paths - lo)
        times, states = simulate_dyson_batch(n, beta, init, horizon, dt, seed, m, path_offset=lo)
        c0, c1, s, _ = _flow_batch(z, times, states, swallow_eps)
        starts.append(c0)
        stops.append(c1)
        sw.append(s)
    return MartingaleSamples(
        n=n, kappa=kappa, z_grid=z, horizon=horizon, dt=dt, seed=seed,
        start=np.concatenate(starts), stop=np.concatenate(stops), swallowed_at=np.concatenate(sw),
        min_fraction=min_fraction,
    )


def martingale_test(
    n: int,
    kappa: float,
    z_grid: Sequence[complex],
    horizon: float,
    paths: int,
    dt: float,
    seed: int,
    *,
    xi_offset: float = 0.0,
    chi_offset: float = 0.0,
    zeta_offset: float = 0.0,
    init: Optional[Sequence[float]] = None,
    n_batches: int = DEFAULT_BATCHES,
    swallow_eps: float = DEFAULT_SWALLOW_EPS,
    min_fraction: float = DEFAULT_MIN_FRACTION,
) -> MartingaleReport:
    """Monte Carlo test that the observable has no drift up to its stopping time.

    A grid point passes when ``|mean| <= 3 SE`` with the standard error
    from batch means.
    """
    samples = martingale_samples(n, kappa, z_grid, horizon, paths, dt, seed, init=init,
                                 swallow_eps=swallow_eps, min_fraction=min_fraction)
    consts = coupling_constants(kappa, n).shifted(xi_offset, chi_offset, zeta_offset)
    return samples.report(consts, n_batches=n_batches)


@dataclass
class QVReport:
    """Quadratic-variation defect per step size, with the fitted order."""

    n: int
    kappa: float
    z: complex
    w: complex
    horizon: float
    paths: int
    dts: List[float]
    mean_abs_defect: List[float]
    se: List[float]
    order: float
    excluded: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["z"] = [self.z.real, self.z.imag]
        d["w"] = [self.w.real, self.w.imag]
        return d


def _coarsen(normals: np.ndarray, factor: int) -> np.ndarray:
    """Sum groups of ``factor`` fine unit increments into coarse unit increments."""
    p, k, n = normals.shape
    return normals.reshape(p, k // factor, factor, n).sum(axis=2) / math.sqrt(factor)


def _euler_paths(init: np.ndarray, beta: float, dt: float, normals: np.ndarray) -> np.ndarray:
    """Plain Euler-Maruyama on a fixed grid from given unit normals, shape (P, K+1, N)."""
    from .dyson import _drift_rows, _gap_rows

    p, k, n = normals.shape
    sigma = math.sqrt(8.0 / beta)
    out = np.empty((p, k + 1, n))
    theta = np.repeat(init[None, :], p, axis=0)
    out[:, 0] = theta
    sq = math.sqrt(dt)
    for j in range(k):
        prop = theta + sigma * sq * normals[:, j]
        if n > 1:
            prop += dt * _drift_rows(theta)
            bad = _gap_rows(prop) <= 0
            if np.any(bad):
                prop[bad] = np.nan
        theta = prop
        out[:, j + 1] = theta
    return out


def quad_variation_test(
    n: int,
    kappa: float,
    z: complex,
    w: complex,
    horizon: float,
    paths: int,
    dts: Sequence[float],
    seed: int,
    *,
    init: Optional[Sequence[float]] = None,
    swallow_eps: float = DEFAULT_SWALLOW_EPS,
) -> QVReport:
    """Realized covariation of the observable at ``z`` and ``w`` against the Green's function.

    Per path the defect is ``sum dh(z) dh(w) + G(g_T(z), g_T(w)) - G(z, w)``.
    All step sizes share one Brownian path per realization: the finest grid
    draws the increments and coarser grids sum them. Paths on which either
    point is swallowed, or the ordering breaks, are excluded at every step
    size. ``order`` is the least-squares slope of ``log mean|defect|``
    against ``log dt``.
    """
    beta = _check_kappa(kappa)
    dts = sorted(float(d) for d in dts)
    if horizon == 0:
        zeros = [0.0] * len(dts)
        return QVReport(n=n, kappa=kappa, z=complex(z), w=complex(w), horizon=0.0, paths=paths, dts=dts,
                        mean_abs_defect=zeros, se=list(zeros), order=float("nan"), excluded=0)
    if not horizon > 0:
        raise DomainError("horizon must be >= 0")
    fine = dts[0]
    factors = [round(d / fine) for d in dts]
    if any(abs(f * fine - d) > 1e-9 * d for f, d in zip(factors, dts)):
        raise DomainError("step sizes must be integer multiples of the smallest one")
    k_fine = round(horizon / fine)
    if abs(k_fine * fine - horizon) > 1e-9 * horizon or any(k_fine % f for f in factors):
        raise DomainError("horizon must be a whole number of steps for every dt")
    init = cluster_init(n) if init is None else np.asarray(init, dtype=float)
    consts = coupling_constants(kappa, n)
    wts = consts.weights()
    normals = np.empty((paths, k_fine, n))
    for p in range(paths):
        rng, _ = path_streams(seed, p)
        normals[p] = rng.standard_normal((k_fine, n))

    g0 = green_disk(z, w)
    defects = []
    bad = np.zeros(paths, dtype=bool)
    for f, d in zip(factors, dts):
        states = _euler_paths(init, beta, d, _coarsen(normals, f))
        bad |= np.isnan(states).any(axis=(1, 2))
        states = np.nan_to_num(states)
        times = np.linspace(0.0, horizon, k_fine // f + 1)
        _, _, sw, g_end, trace = _flow_batch(np.array([z, w]), times, states, swallow_eps, record_increments=True)
        bad |= ~np.isnan(sw).all(axis=1)
        hv = trace @ wts  # (K, P, 2)
        dh = np.diff(hv, axis=0)
        qv = np.sum(dh[:, :, 0] * dh[:, :, 1], axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_t = np.log(np.abs(g_end[:, 0] * np.conj(g_end[:, 1]) - 1.0)) - np.log(np.abs(g_end[:, 0] - g_end[:, 1]))
        defects.append(qv + g_t - g0)
    keep = ~bad
    mad = [float(np.mean(np.abs(dd[keep]))) for dd in defects]
    se = [float(np.std(np.abs(dd[keep]), ddof=1) / math.sqrt(max(keep.sum(), 1))) for dd in defects]
    slope = float(np.polyfit(np.log(dts), np.log(mad), 1)[0]) if len(dts) > 1 else float("nan")
    return QVReport(n=n, kappa=kappa, z=complex(z), w=complex(w), horizon=horizon, paths=paths, dts=dts,
                    mean_abs_defect=mad, se=se, order=slope, excluded=int(bad.sum()))


def _constant_path(x_angle: float, dt: float) -> DrivingPath:
    return DrivingPath(times=np.array([0.0, dt, 2.0 * dt]), states=np.full((3, 1), x_angle), beta=None,
                       velocities=np.zeros((3, 1)))


def hadamard_check(z: complex, w: complex, x: complex, dt: float = 1e-5):
    """Time derivative of ``G(g_t(z), g_t(w))`` at ``t = 0`` for a single slit driven at ``x``.

    The left side is a fourth-order central difference over
    ``t = -2dt, ..., 2dt``: forward flow for positive times, reverse flow
    for negative ones. Returns ``(lhs, rhs)`` with
    ``rhs = -Re((z+x)/(z-x)) Re((w+x)/(w-x))``.
    """
    z, w, x = complex(z), complex(w), complex(x)
    if abs(abs(x) - 1.0) > 1e-12:
        raise DomainError("x must lie on the unit circle")
    if abs(z - w) < 1e-14 or abs(z - x) < 1e-14 or abs(w - x) < 1e-14:
        raise SingularEvaluation("hadamard_check needs distinct z, w, x")
    path = _constant_path(math.atan2(x.imag, x.real), dt)
    fwd = evolve([z, w], path, scheme="rk4", swallow_eps=0.0)
    g1, g2 = fwd.g[1], fwd.g[2]
    pts = np.array([z, w])
    m1, m2 = reverse_flow(pts, path, dt), reverse_flow(pts, path, 2.0 * dt)

    def gr(a):
        return green_disk(a[0], a[1])

    lhs = (8.0 * (gr(g1) - gr(m1)) - (gr(g2) - gr(m2))) / (12.0 * dt)
    rhs = -((z + x) / (z - x)).real * ((w + x) / (w - x)).real
    return float(lhs), float(rhs)


def classical_invariant(n: int, t: float, z, path: DrivingPath, *, frac: float = 0.1):
    """``-2 sum arg(g - X_i) + (N+2) arg g - 2 arg g'`` at time ``t`` along a deterministic path.

    Arguments are the continuous branches accumulated by the flow.
    Accepts a scalar or an array of points.
    """
    if not path.deterministic:
        raise DomainError("classical_invariant needs a deterministic (Calogero) path")
    if path.n != n:
        raise DomainError(f"path has {path.n} particles, expected {n}")
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if t == 0:
        pts = FlowArrays(zz, path.states[0], swallow_eps=0.0).snapshot()
    else:
        pts = evolve(zz, path, t_end=t, scheme="rk4", record=False, frac=frac).points
    out = []
    for p in pts:
        if p.swallowed:
            raise SwallowedError(f"point {p.z0} swallowed at t={p.swallowed_at}")
        out.append(-2.0 * np.imag(p.log_diffs).sum() + (n + 2) * p.log_g.imag - 2.0 * p.log_dg.imag)
    return float(out[0]) if np.ndim(z) == 0 else np.array(out)
