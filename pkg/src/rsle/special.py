"""Complex special functions and scalar root solvers.

The principal Lambert branch and the time-extent solver are the only
transcendental primitives the closed-form hydrodynamic maps need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, BranchCutError, ConvergenceError, DomainError

__all__ = [
    "INV_E",
    "TimeExtents",
    "lambert_w0",
    "bracketed_root",
    "solve_extents",
    "f_t",
]

INV_E = math.exp(-1.0)
_SERIES_RADIUS = 0.2 * INV_E
_ASYMPTOTIC_RADIUS = 3.0
_BRANCH_RADIUS = 0.3
_MAX_HALLEY = 64

# Taylor coefficients (-n)^(n-1)/n! of W0 about 0.
_SERIES = [(-n) ** (n - 1) / math.factorial(n) for n in range(1, 9)]


def _seed(z: np.ndarray) -> np.ndarray:
    """Initial guesses for Halley iteration, chosen region by region."""
    w = np.log1p(z)
    az = np.abs(z)

    small = az < _SERIES_RADIUS
    if np.any(small):
        zs = z[small]
        acc = np.zeros_like(zs)
        for c in reversed(_SERIES):
            acc = (acc + c) * zs
        w[small] = acc

    big = az > _ASYMPTOTIC_RADIUS
    if np.any(big):
        l1 = np.log(z[big])
        l2 = np.log(l1)
        w[big] = l1 - l2 + l2 / l1

    near = (np.abs(z + INV_E) < _BRANCH_RADIUS) & ~small
    if np.any(near):
        p = np.sqrt(2.0 * (math.e * z[near] + 1.0))
        w[near] = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
    return w


def _halley(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    active = np.ones(z.shape, dtype=bool)
    for _ in range(_MAX_HALLEY):
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - z[active]
        wp1 = wa + 1.0
        # wp1 == 0 only at the branch point, which callers handle upstream
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w[active] = wa - dw
        # near -1/e the root is ill-conditioned: stop on a round-off residual
        done = (np.abs(dw) <= 4e-16 * (1.0 + np.abs(wa))) | (
            np.abs(f) <= 1e-15 * np.abs(z[active])
        )
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return w
    raise ConvergenceError("Halley iteration for W0 did not converge")


def lambert_w0(z):
    """Principal branch of the Lambert W function.

    Parameters
    ----------
    z : complex or real scalar or array
        Argument. Real inputs (or complex inputs with zero imaginary part)
        below ``-1/e`` lie on the branch cut and are rejected.

    Returns
    -------
    w : same shape as ``z``
        Solution of ``w * exp(w) = z`` with ``w -> z`` as ``z -> 0``.
        Real dtype inputs give real outputs.

    Raises
    ------
    BranchCutError
        If any entry is real and strictly less than ``-1/e``.
    ConvergenceError
        If the Halley refinement stalls.
    """
    arr = np.asarray(z)
    real_input = not np.iscomplexobj(arr)
    zc = np.atleast_1d(arr).astype(complex)
    if not np.all(np.isfinite(zc)):
        raise DomainError("lambert_w0 requires finite input")

    on_axis = zc.imag == 0.0
    if np.any(on_axis & (zc.real < -INV_E)):
        raise BranchCutError("argument on the W0 branch cut (-inf, -1/e)")

    out = np.empty_like(zc)
    branch_pt = on_axis & (zc.real == -INV_E)
    zero = zc == 0
    out[branch_pt] = -1.0
    out[zero] = 0.0

    # real axis: iterate in real arithmetic so the result is exactly real
    real_mask = on_axis & ~branch_pt & ~zero
    if np.any(real_mask):
        zr = zc.real[real_mask]
        wr = _seed(zr.astype(complex)).real
        out[real_mask] = _halley(zr, wr)

    rest = ~on_axis
    if np.any(rest):
        zz = zc[rest]
        out[rest] = _halley(zz, _seed(zz))

    if real_input:
        out = out.real
    if arr.ndim == 0:
        return out[0].item()
    return out.reshape(arr.shape)


def bracketed_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-14,
) -> float:
    """Root of a monotone scalar function inside ``[lo, hi]``.

    Brent's method; the returned point has bracket width below ``tol``
    (relative to machine precision near large roots).

    Raises
    ------
    BracketError
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    return float(brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True)
class TimeExtents:
    """Parameter ranges of the hull-boundary curves at hydrodynamic time ``t``.

    ``x_min`` and ``r_max`` exist only past the critical time ``t = 1``.
    """

    t: float
    x_max: float
    r_min: float
    x_min: Optional[float] = None
    r_max: Optional[float] = None


def _x_tanh(x: float) -> float:
    return 0.5 * x * math.tanh(0.5 * x)


def _x_coth(x: float) -> float:
    if x == 0.0:
        return 1.0
    return 0.5 * x / math.tanh(0.5 * x)


def f_t(r, t: float):
    """``F_t(r) = t(1-r^2)/(r log r) + (1+r^2)/(2r)`` for ``0 < r < 1``."""
    r = np.asarray(r, dtype=float)
    return t * (1.0 - r * r) / (r * np.log(r)) + (1.0 + r * r) / (2.0 * r)


def solve_extents(t: float) -> TimeExtents:
    """Solve the defining equations for the curve parameter ranges.

    ``x_max`` solves ``(x/2) tanh(x/2) = t`` and ``x_min`` (``t > 1``)
    solves ``(x/2) coth(x/2) = t``. The radii ``r_min``, ``r_max`` are
    found independently from ``F_t(r) = +1`` and ``F_t(r) = -1`` so the
    identities ``x = -log r`` serve as a consistency check.
    """
    if not (t > 0.0) or not math.isfinite(t):
        raise DomainError(f"solve_extents needs t > 0, got {t}")

    x_max = bracketed_root(lambda x: _x_tanh(x) - t, 0.0, 2.0 * t + 2.0)
    # F_t(1-) = 1 - 2t and F_t(0+) = +inf; search in s = -log r so tiny radii
    # at large t keep full relative precision
    s_lo, s_hi = 1e-6, 2.0 * t + 4.0
    s_in = bracketed_root(lambda s: float(f_t(math.exp(-s), t)) - 1.0, s_lo, s_hi)
    r_min = math.exp(-s_in)

    if t <= 1.0:
        return TimeExtents(t=t, x_max=x_max, r_min=r_min)

    x_min = bracketed_root(lambda x: _x_coth(x) - t, 0.0, 2.0 * t)
    s_out = bracketed_root(lambda s: float(f_t(math.exp(-s), t)) + 1.0, s_lo, s_in)
    return TimeExtents(t=t, x_max=x_max, r_min=r_min, x_min=x_min, r_max=math.exp(-s_out))
