"""Circular beta-Dyson Brownian motions and the Calogero-Sutherland flow.

Angles are kept unwrapped and sorted; a state is valid when every cyclic
gap (including the wrap-around gap ``theta[0] + 2*pi - theta[-1]``) is
positive.

Random streams
--------------
Path ``k`` of a run with master seed ``s`` draws its base Brownian
increments from ``SeedSequence(s, spawn_key=(k, 0))`` and its
Brownian-bridge refinements from ``SeedSequence(s, spawn_key=(k, 1))``.
A path therefore depends only on ``(s, k)`` and the numerical parameters,
never on how many paths or workers share a run.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import CollisionError, DomainError, SingularEvaluation

__all__ = [
    "DrivingPath",
    "as_angles",
    "single_source",
    "equally_spaced",
    "cot_drift",
    "cot_drift_batch",
    "min_cyclic_gap",
    "path_streams",
    "simulate_dyson",
    "simulate_dyson_batch",
    "calogero_flow",
    "empirical_stieltjes",
    "hamiltonian",
]

TWO_PI = 2.0 * math.pi
DEFAULT_GAP_FLOOR = 1e-9
DEFAULT_MAX_HALVINGS = 30
DEFAULT_EPS0 = 1e-6
DEFAULT_GAP_CFL = 0.05
_CHUNK = 512


@dataclass(frozen=True)
class DrivingPath:
    """Time-stamped angle states of the driving particles.

    Attributes
    ----------
    times : ndarray, shape (K,)
        Strictly increasing, ``times[0] == 0``.
    states : ndarray, shape (K, N)
        Unwrapped angles at each saved time.
    beta : float or None
        Dyson parameter; ``None`` marks a deterministic (Calogero) flow.
    seed : int or None
        Master seed of a stochastic path.
    velocities : ndarray or None, shape (K, N)
        ``d theta / dt`` at saved times. Present for deterministic paths and
        used for cubic Hermite interpolation between saved states.
    """

    times: np.ndarray
    states: np.ndarray
    beta: Optional[float] = None
    seed: Optional[int] = None
    velocities: Optional[np.ndarray] = None
    path_index: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or times.ndim != 1 or states.shape[0] != times.shape[0]:
            raise DomainError("DrivingPath needs times (K,) and states (K, N)")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise DomainError("DrivingPath times must start at 0 and increase strictly")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if self.velocities is not None:
            object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def deterministic(self) -> bool:
        return self.beta is None

    @property
    def kappa(self) -> Optional[float]:
        return None if self.beta is None else 8.0 / self.beta

    def state_at(self, t: float) -> np.ndarray:
        """Left-endpoint state for stochastic paths, Hermite value otherwise."""
        if not 0.0 <= t <= self.horizon * (1 + 1e-12):
            raise DomainError(f"time {t} outside path horizon {self.horizon}")
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(max(k, 0), len(self.times) - 1)
        if self.times[k] == t or self.velocities is None or k == len(self.times) - 1:
            return self.states[k].copy()
        return hermite(self, k, np.array([(t - self.times[k])]))[0]

    def to_csv(self, path) -> None:
        """Write the normative ``t,theta_1,...,theta_N`` CSV."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"theta_{i + 1}" for i in range(self.n)])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, beta: Optional[float] = None, seed: Optional[int] = None) -> "DrivingPath":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(times=data[:, 0], states=data[:, 1:], beta=beta, seed=seed)


def hermite(path: DrivingPath, k: int, dt_local: np.ndarray) -> np.ndarray:
    """Cubic Hermite interpolation on ``[times[k], times[k+1]]``.

    ``dt_local`` holds offsets from ``times[k]``; returns shape (len, N).
    """
    h = path.times[k + 1] - path.times[k]
    s = (np.asarray(dt_local, dtype=float) / h)[:, None]
    y0, y1 = path.states[k], path.states[k + 1]
    m0, m1 = path.velocities[k] * h, path.velocities[k + 1] * h
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * m0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * m1
    )


def as_angles(theta: Sequence[float]) -> np.ndarray:
    """Validate an AngleVector: 1-D, finite, sorted, all cyclic gaps positive."""
    arr = np.array(theta, dtype=float).reshape(-1)
    if arr.size < 1 or not np.all(np.isfinite(arr)):
        raise DomainError("angle vector must be non-empty and finite")
    if arr.size > 1 and min_cyclic_gap(arr) <= 0.0:
        raise DomainError("angles must be strictly increasing with total span below 2*pi")
    return arr


def single_source(n: int, theta0: float = 0.0, eps0: float = DEFAULT_EPS0) -> np.ndarray:
    """Coincident start at ``theta0``, regularized uniformly over ``theta0 +- eps0``."""
    if n == 1:
        return np.array([theta0], dtype=float)
    return theta0 + np.linspace(-eps0, eps0, n)


def equally_spaced(n: int, offset: float = 0.0) -> np.ndarray:
    """``n`` angles at spacing ``2*pi/n``, symmetric about ``offset``."""
    return offset + TWO_PI * (np.arange(n) - (n - 1) / 2.0) / n


def _regularize(theta: np.ndarray, eps0: float) -> np.ndarray:
    """Spread clusters of coincident angles uniformly over ``+- eps0``."""
    arr = np.sort(np.asarray(theta, dtype=float))
    out = arr.copy()
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[j + 1] == arr[i]:
            j += 1
        if j > i:
            out[i : j + 1] = arr[i] + np.linspace(-eps0, eps0, j - i + 1)
        i = j + 1
    return out


@njit(cache=True, error_model="numpy")
def cot_drift(theta):
    """Drift ``2 * sum_{j != i} cot((theta_i - theta_j) / 2)``.

    Each pair is evaluated once and added antisymmetrically so the total
    drift cancels to round-off. Uses half-angle products; close pairs fall
    back to the direct difference to keep relative accuracy.
    """
    n = theta.shape[0]
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    out = np.zeros(n)
    for i in range(n):
        ci = c[i]
        si = s[i]
        acc = 0.0
        for j in range(i + 1, n):
            den = si * c[j] - ci * s[j]
            if abs(den) < 1e-4:
                v = 1.0 / math.tan(0.5 * (theta[i] - theta[j]))
            else:
                v = (ci * c[j] + si * s[j]) / den
            acc += v
            out[j] -= v
        out[i] += acc
    return 2.0 * out


def cot_drift_batch(theta: np.ndarray) -> np.ndarray:
    """Vectorized drift for a batch of small states, shape (..., N)."""
    d = theta[..., :, None] - theta[..., None, :]
    n = theta.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = 1.0 / np.tan(0.5 * d)
    idx = np.arange(n)
    c[..., idx, idx] = 0.0
    return 2.0 * c.sum(axis=-1)


@njit(cache=True)
def min_cyclic_gap(theta):
    """Smallest cyclic gap; non-positive if the ordering is broken."""
    n = theta.shape[0]
    m = theta[0] + TWO_PI - theta[n - 1]
    for i in range(n - 1):
        d = theta[i + 1] - theta[i]
        if d < m:
            m = d
    return m


@njit(cache=True, error_model="numpy")
def _drift_rows(theta):
    out = np.empty_like(theta)
    for p in range(theta.shape[0]):
        out[p] = cot_drift(theta[p])
    return out


@njit(cache=True)
def _gap_rows(theta):
    out = np.empty(theta.shape[0])
    for p in range(theta.shape[0]):
        out[p] = min_cyclic_gap(theta[p])
    return out


def path_streams(seed: int, path_index: int = 0):
    """Base-increment and bridge generators for one path (see module doc)."""
    base = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path_index, 0)))
    bridge = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path_index, 1)))
    return base, bridge


class _Increments:
    """Chunked standard normal rows from one generator."""

    def __init__(self, rng: np.random.Generator, n: int):
        self._rng = rng
        self._n = n
        self._buf = np.empty((0, n))
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos >= self._buf.shape[0]:
            self._buf = self._rng.standard_normal((_CHUNK, self._n))
            self._pos = 0
        row = self._buf[self._pos]
        self._pos += 1
        return row


def simulate_dyson(
    n: int,
    beta: float,
    init: Optional[Sequence[float]],
    horizon: float,
    dt: float,
    seed: int,
    *,
    path_index: int = 0,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    gap_cfl: Optional[float] = DEFAULT_GAP_CFL,
    save_every: int = 1,
    save_substeps: bool = False,
    allow_collisions: bool = False,
    eps0: float = DEFAULT_EPS0,
) -> DrivingPath:
    """Sample circular Dyson Brownian motion in SDE time.

    Euler-Maruyama for ``d theta_i = sqrt(8/beta) dB_i + 2 sum cot(...) dt``.
    Each base step is ``min(dt, gap_cfl * gap**2)`` (``gap_cfl=None`` keeps
    the fixed ``dt``). A proposal that breaks the ordering, halves the
    smallest cyclic gap, or undercuts ``gap_floor`` is split in two with a
    Brownian bridge, recursively up to ``max_halvings`` times.

    Parameters
    ----------
    init : sequence of float or None
        Sorted starting angles; ``None`` means a single source at angle 0
        spread over ``+- eps0``.
    save_every : int
        Keep every ``save_every``-th base step (the final time is always kept).
    save_substeps : bool
        Keep every accepted sub-step instead; the Loewner solver then sees
        the exact grid the SDE was integrated on.

    Raises
    ------
    DomainError
        Invalid parameters, or ``beta < 1`` without ``allow_collisions``.
    CollisionError
        The gap guard failed after ``max_halvings`` bisections.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not (beta > 0) or not math.isfinite(beta):
        raise DomainError(f"beta must be positive, got {beta}")
    if beta < 1.0 and not allow_collisions:
        raise DomainError(f"beta={beta} < 1 allows collisions; pass allow_collisions=True")
    if not (horizon > 0) or not (dt > 0):
        raise DomainError("horizon and dt must be positive")
    theta = single_source(n, 0.0, eps0) if init is None else as_angles(init)
    if theta.size != n:
        raise DomainError(f"init has {theta.size} angles, expected n={n}")

    sigma = math.sqrt(8.0 / beta)
    base_rng, bridge_rng = path_streams(seed, path_index)
    incr = _Increments(base_rng, n)

    times = [0.0]
    states = [theta.copy()]
    t = 0.0
    step = 0
    while t < horizon:
        h = min(dt, horizon - t)
        if gap_cfl is not None and n > 1:
            h = min(h, gap_cfl * min_cyclic_gap(theta) ** 2)
        last = horizon - t <= h * (1 + 1e-12)
        if last:
            h = horizon - t
        dB = incr.next() * math.sqrt(h)
        stack = [(h, dB, 0)]
        while stack:
            hh, db, depth = stack.pop()
            gap0 = min_cyclic_gap(theta) if n > 1 else TWO_PI
            prop = theta + sigma * db
            if n > 1:
                prop += hh * cot_drift(theta)
                gap1 = min_cyclic_gap(prop)
                ok = gap1 >= 0.5 * gap0 and gap1 >= gap_floor
            else:
                ok = True
            if ok:
                theta = prop
                t = t + hh
                if save_substeps and stack:
                    times.append(t)
                    states.append(theta.copy())
                continue
            if depth >= max_halvings:
                raise CollisionError(
                    f"gap guard failed at t={t:.6g} after {max_halvings} halvings "
                    f"(min gap {gap0:.3g})"
                )
            z = bridge_rng.standard_normal(n)
            db1 = 0.5 * db + 0.5 * math.sqrt(hh) * z
            stack.append((0.5 * hh, db - db1, depth + 1))
            stack.append((0.5 * hh, db1, depth + 1))
        if last:
            t = horizon
        step += 1
        if last or save_substeps or step % save_every == 0:
            times.append(t)
            states.append(theta.copy())
    return DrivingPath(
        times=np.array(times),
        states=np.array(states),
        beta=float(beta),
        seed=int(seed),
        path_index=path_index,
        meta={"dt": dt, "gap_cfl": gap_cfl, "eps0": eps0},
    )


def _fixed_grid(horizon: float, dt: float) -> np.ndarray:
    """Base-step times and sizes of :func:`simulate_dyson` with ``gap_cfl=None``."""
    times, steps = [0.0], []
    t = 0.0
    while t < horizon:
        h = min(dt, horizon - t)
        if horizon - t <= h * (1 + 1e-12):
            h = horizon - t
            t = horizon
        else:
            t = t + h
        times.append(t)
        steps.append(h)
    return np.array(times), steps


def simulate_dyson_batch(
    n: int,
    beta: float,
    init: Optional[Sequence[float]],
    horizon: float,
    dt: float,
    seed: int,
    paths: int,
    *,
    path_offset: int = 0,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    eps0: float = DEFAULT_EPS0,
):
    """Many fixed-step paths on a shared time grid.

    Path ``k`` is bit-identical to
    ``simulate_dyson(..., path_index=path_offset + k, gap_cfl=None)``:
    the batch runs the same Euler updates on the same streams and hands
    any path whose proposal trips the gap guard to that function.

    Returns
    -------
    times : ndarray, shape (K,)
    states : ndarray, shape (paths, K, N)
    """
    if n < 1 or paths < 1:
        raise DomainError("n and paths must be >= 1")
    if not (beta >= 1.0) or not math.isfinite(beta):
        raise DomainError(f"batch simulation needs finite beta >= 1, got {beta}")
    if not (horizon > 0) or not (dt > 0):
        raise DomainError("horizon and dt must be positive")
    theta0 = single_source(n, 0.0, eps0) if init is None else as_angles(init)
    if theta0.size != n:
        raise DomainError(f"init has {theta0.size} angles, expected n={n}")
    times, hs = _fixed_grid(horizon, dt)
    steps = len(hs)
    chunks = -(-steps // _CHUNK)
    normals = np.empty((paths, chunks * _CHUNK, n))
    for p in range(paths):
        rng, _ = path_streams(seed, path_offset + p)
        for c in range(chunks):
            normals[p, c * _CHUNK : (c + 1) * _CHUNK] = rng.standard_normal((_CHUNK, n))

    sigma = math.sqrt(8.0 / beta)
    states = np.empty((paths, times.size, n))
    theta = np.repeat(theta0[None, :], paths, axis=0)
    states[:, 0] = theta
    failed = np.zeros(paths, dtype=bool)
    for k, h in enumerate(hs):
        prop = theta + sigma * (normals[:, k] * math.sqrt(h))
        if n > 1:
            prop += h * _drift_rows(theta)
            gap0 = _gap_rows(theta)
            gap1 = _gap_rows(prop)
            failed |= ~((gap1 >= 0.5 * gap0) & (gap1 >= gap_floor))
        theta = prop
        states[:, k + 1] = theta
    for p in np.flatnonzero(failed):
        path = simulate_dyson(n, beta, theta0, horizon, dt, seed, path_index=path_offset + p, gap_floor=gap_floor,
                              max_halvings=max_halvings, gap_cfl=None)
        states[p] = path.states
    return times, states


def _rk4_step(theta: np.ndarray, h: float) -> np.ndarray:
    k1 = cot_drift(theta)
    k2 = cot_drift(theta + 0.5 * h * k1)
    k3 = cot_drift(theta + 0.5 * h * k2)
    k4 = cot_drift(theta + h * k3)
    return theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def calogero_flow(
    init: Sequence[float],
    horizon: float,
    dt: float,
    *,
    gap_floor: float = DEFAULT_GAP_FLOOR,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    gap_cfl: Optional[float] = DEFAULT_GAP_CFL,
    eps0: float = DEFAULT_EPS0,
) -> DrivingPath:
    """Deterministic flow ``d theta_i/dt = 2 sum_{j != i} cot((theta_i - theta_j)/2)``.

    Classical RK4 with the same gap guard as :func:`simulate_dyson`.
    Coincident starting angles are spread over ``+- eps0``. The returned
    path carries velocities for Hermite interpolation.
    """
    if not (horizon > 0) or not (dt > 0):
        raise DomainError("horizon and dt must be positive")
    theta = np.array(init, dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise DomainError("angles must be finite")
    if np.any(np.diff(theta) < 0):
        raise DomainError("angles must be sorted")
    if theta.size > 1 and np.any(np.diff(theta) == 0):
        theta = _regularize(theta, eps0)
    theta = as_angles(theta)
    n = theta.size

    times = [0.0]
    states = [theta.copy()]
    t = 0.0
    while t < horizon:
        h = min(dt, horizon - t)
        if gap_cfl is not None and n > 1:
            h = min(h, gap_cfl * min_cyclic_gap(theta) ** 2)
        last = horizon - t <= h * (1 + 1e-12)
        if last:
            h = horizon - t
        stack = [(h, 0)]
        while stack:
            hh, depth = stack.pop()
            if n == 1:
                t += hh
                continue
            gap0 = min_cyclic_gap(theta)
            prop = _rk4_step(theta, hh)
            gap1 = min_cyclic_gap(prop)
            if gap1 >= 0.5 * gap0 and gap1 >= gap_floor:
                theta = prop
                t += hh
                continue
            if depth >= max_halvings:
                raise CollisionError(f"Calogero flow gap guard failed at t={t:.6g}")
            stack.append((0.5 * hh, depth + 1))
            stack.append((0.5 * hh, depth + 1))
        if last:
            t = horizon
        times.append(t)
        states.append(theta.copy())
    states_arr = np.array(states)
    vel = np.array([cot_drift(s) if n > 1 else np.zeros(1) for s in states_arr])
    return DrivingPath(times=np.array(times), states=states_arr, beta=None, velocities=vel)


def empirical_stieltjes(state: Sequence[float], z, eps: float = 1e-12):
    """Circular Stieltjes transform ``(1/N) sum (x_i + z)/(x_i - z)``, ``x_i = e^{i theta_i}``."""
    x = np.exp(1j * np.asarray(state, dtype=float))
    zz = np.asarray(z, dtype=complex)
    d = x[None, :] - zz.reshape(-1, 1)
    if np.min(np.abs(d)) < eps:
        raise SingularEvaluation("z coincides with a driving point")
    m = np.mean((x[None, :] + zz.reshape(-1, 1)) / d, axis=1)
    return m.reshape(zz.shape) if zz.ndim else complex(m[0])


def hamiltonian(p: Sequence[float], theta: Sequence[float]) -> float:
    """Calogero-Sutherland energy ``sum p^2/2 - sum_{i<j} 4 / sin^2((theta_i - theta_j)/2)``."""
    p = np.asarray(p, dtype=float)
    th = np.asarray(theta, dtype=float)
    if p.shape != th.shape:
        raise DomainError("momenta and angles must have equal length")
    kinetic = 0.5 * float(np.dot(p, p))
    if th.size < 2:
        return kinetic
    i, j = np.triu_indices(th.size, 1)
    s = np.sin(0.5 * (th[i] - th[j]))
    if np.min(np.abs(s)) < 1e-300:
        raise SingularEvaluation("coincident angles in hamiltonian")
    return kinetic - float(np.sum(4.0 / (s * s)))
