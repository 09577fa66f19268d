"""Dormand-Prince 5(4) integrator with PI step control and dense output.

Written for smooth, non-stiff vector fields whose solutions may blow up in
finite time: integration stops when the state norm exceeds a fixed multiple
of its initial norm.  Dense output between accepted steps is cubic Hermite.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import StepSizeUnderflow

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
# difference between the 5th- and 4th-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

ORDER = 5
_BETA = 0.04
_ALPHA = 1.0 / ORDER - 0.75 * _BETA
_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0

REASONS = ("horizon", "blowup", "event", "tolerance-failure")


@dataclass
class Solution:
    """Accepted nodes of an integration, with Hermite dense output."""

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    accepted: int
    rejected: int
    reason: str
    t_event: float = None
    meta: dict = field(default_factory=dict)

    def __call__(self, t):
        """State at time(s) t inside the integrated range."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        fwd = self.t[-1] >= self.t[0]
        key = self.t if fwd else -self.t
        q = ts if fwd else -ts
        lo, hi = key[0], key[-1]
        if np.any(q < lo - 1e-12 * max(1.0, abs(lo))) or np.any(q > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError("requested time outside the integrated range")
        idx = np.clip(np.searchsorted(key, q, side="right") - 1, 0, max(len(key) - 2, 0))
        out = np.empty((ts.size, self.y.shape[1]))
        for j, (i, tt) in enumerate(zip(idx, ts)):
            out[j] = _hermite(self.t, self.y, self.f, i, tt)
        return out[0] if scalar else out


def _hermite(T, Y, F, i, t):
    if len(T) == 1:
        return Y[0].copy()
    t0, t1 = T[i], T[i + 1]
    h = t1 - t0
    if h == 0:
        return Y[i].copy()
    s = (t - t0) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    return h00 * Y[i] + h10 * h * F[i] + h01 * Y[i + 1] + h11 * h * F[i + 1]


def _step(fun, t, y, f0, h):
    """One Dormand-Prince step; returns (y_new, f_new, error vector)."""
    K = np.empty((7, y.size))
    K[0] = f0
    for s in range(1, 7):
        dy = np.zeros_like(y)
        for j, a in enumerate(_A[s]):
            if a:
                dy += a * K[j]
        K[s] = fun(t + _C[s] * h, y + h * dy)
    y_new = y + h * (_B @ K)
    # K[6] is f(t + h, y_new) by the first-same-as-last property
    return y_new, K[6], h * (_E @ K)


def _initial_step(fun, t0, y0, f0, direction, rtol, atol):
    sc = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
    return min(100 * h0, h1)


def integrate(fun, t0, y0, t_end, rtol=1e-9, atol=1e-12, h0=None, growth_limit=1e6,
              event=None, fixed_step=None, max_steps=200000, raise_on_underflow=True):
    """Integrate y' = fun(t, y) from t0 towards t_end (either direction).

    Stops at ``t_end`` (reason ``"horizon"``), when ``|y| > growth_limit *
    |y0|`` (``"blowup"``), or at the first zero of ``event(t, y)`` reached
    from below (``"event"``, located on the dense output).  With
    ``fixed_step`` set, steps have that size and no error control is done.
    """
    y0 = np.array(y0, dtype=float).ravel()
    t, y = float(t0), y0.copy()
    direction = 1.0 if t_end >= t0 else -1.0
    f = np.asarray(fun(t, y), dtype=float)
    T, Y, F = [t], [y.copy()], [f.copy()]
    norm0 = np.linalg.norm(y0)
    limit = growth_limit * norm0 if norm0 > 0 else np.inf
    accepted = rejected = 0
    reason, t_event = "horizon", None
    g_prev = event(t, y) if event is not None else None

    if t == t_end:
        return Solution(np.array(T), np.array(Y), np.array(F), 0, 0, reason)

    if fixed_step is not None:
        h = abs(float(fixed_step))
    else:
        h = abs(h0) if h0 is not None else _initial_step(fun, t, y, f, direction, rtol, atol)
        # a near-zero state with nonzero slope can give a guess below the
        # underflow threshold; start above it and let error control decide
        h = max(h, 1e-12 * max(1.0, abs(t)))
    err_prev = 1e-4

    while True:
        if accepted >= max_steps:
            raise RuntimeError(f"exceeded {max_steps} steps at t={t:.6g}")
        remaining = abs(t_end - t)
        # absorb a rounding sliver into the final step
        last = remaining <= h * (1 + 1e-9)
        hs = remaining if last else h
        if hs < 1e-14 * max(1.0, abs(t)):
            if raise_on_underflow:
                raise StepSizeUnderflow(t, hs)
            reason = "tolerance-failure"
            break
        y_new, f_new, e = _step(fun, t, y, f, direction * hs)
        finite = np.all(np.isfinite(y_new))
        if fixed_step is not None:
            err = 0.0 if finite else np.inf
        else:
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((e / sc) ** 2)) if finite else np.inf

        if err > 1.0:
            rejected += 1
            if fixed_step is not None:
                raise FloatingPointError(f"non-finite state at t={t:.6g} with fixed steps")
            fac = _FAC_MIN if not np.isfinite(err) else max(_FAC_MIN, _SAFETY * err ** (-1.0 / ORDER))
            h = hs * fac
            continue

        t_new = t_end if last else t + direction * hs
        accepted += 1
        T.append(t_new)
        Y.append(y_new)
        F.append(f_new)
        t, y, f = t_new, y_new, f_new

        if event is not None:
            g = event(t, y)
            if g_prev < 0 <= g:
                i = len(T) - 2
                def gt(tt):
                    return event(tt, _hermite(T, Y, F, i, tt))
                te = brentq(gt, T[i], T[i + 1], xtol=1e-14 * max(1.0, abs(t)), rtol=1e-14)
                ye = _hermite(T, Y, F, i, te)
                T[-1], Y[-1], F[-1] = te, ye, np.asarray(fun(te, ye), dtype=float)
                reason, t_event = "event", te
                break
            g_prev = g
        if np.linalg.norm(y) > limit:
            reason = "blowup"
            break
        if last:
            break
        if fixed_step is None:
            fac = _SAFETY * max(err, 1e-10) ** (-_ALPHA) * err_prev ** _BETA
            h = hs * min(_FAC_MAX, max(_FAC_MIN, fac))
            err_prev = max(err, 1e-4)

    return Solution(np.array(T), np.array(Y), np.array(F), accepted, rejected, reason, t_event)
