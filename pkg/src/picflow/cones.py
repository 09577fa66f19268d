"""Curvature cones, the reaction ODE dRm/dt = Q(Rm), and invariance experiments.

A cone is described by a margin function: positive inside, zero on the
boundary, negative outside and 1-homogeneous.  The builtin cones are the
nonnegative curvature operator cone and the weakly PIC, PIC1 and PIC2
cones.  Everything here works at the level of the reaction ODE; there is no
spatial Laplacian.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import fourd
from .errors import DegenerateDirection, DimensionNot4, NoBracket
from .isotropic import isotropic_value, min_isotropic, random_weakly_pic
from .ode import integrate
from .tensor import (CurvatureTensor, _check_dim, frobenius_norm, identity_tensor,
                     q_components, q_reaction, scalar)

VIOLATION_TOL = 1e-6
BOUNDARY_OFFSET = 1e-8


@dataclass(frozen=True)
class Evaluation:
    """Margin value, its slope along the identity, and a warm-start hint."""

    value: float
    slope: float
    hint: object = None


@dataclass(frozen=True)
class ConeSpec:
    """A closed O(n)-invariant cone given by a 1-homogeneous margin.

    ``evaluate(Rm, hint)`` returns an :class:`Evaluation`; the slope is the
    derivative of the margin along ``I`` at the active minimizer, which the
    support-level iteration uses.  ``verify`` has the same signature and is
    used once per boundary sample to guard against missed minimizers.
    """

    name: str
    evaluate: Callable
    contains_identity_interior: bool = True
    scale_invariant: bool = True
    verify: Callable = None  # optional stronger evaluation for boundary placement

    def margin(self, Rm, hint=None):
        return self.evaluate(Rm, hint).value


def _psd_evaluate(Rm, hint=None):
    ev = np.linalg.eigvalsh(fourd.curvature_operator(Rm))
    return Evaluation(float(ev[0]), fourd.OPERATOR_SCALE, None)


# lighter optimizer settings than the defaults: cone margins are evaluated
# many times along trajectories and are warm-started from the last minimizer
CONE_OPTIMIZER = {"screen_factor": 16, "max_iter": 30, "gtol": 1e-5, "polish": 1}


# boundary placement search: a missed minimizer there would start the
# trajectory outside the cone
VERIFY_BUDGET = 64


def _isotropic_evaluator(mode, budget, seed, settings=CONE_OPTIMIZER):
    def evaluate(Rm, hint=None):
        rep = min_isotropic(Rm, mode, budget=budget, seed=seed, init_frames=hint, **settings)
        I = identity_tensor(Rm.n)
        slope = isotropic_value(I, rep.frame, rep.lam, rep.mu)
        return Evaluation(rep.minimum, slope, rep.frame)
    return evaluate


CONE_NAMES = ("psd", "weak-pic", "weak-pic1", "weak-pic2")


def builtin_cones(n, budget=4, seed=0):
    """PSD curvature operator, weakly PIC, weakly PIC1 and weakly PIC2."""
    _check_dim(n)
    return [ConeSpec("psd", _psd_evaluate)] + [
        ConeSpec(name, _isotropic_evaluator(mode, budget, seed),
                 verify=_isotropic_evaluator(mode, VERIFY_BUDGET, seed, {}))
        for name, mode in (("weak-pic", "PIC"), ("weak-pic1", "PIC1"), ("weak-pic2", "PIC2"))
    ]


def get_cone(name, n, **kw):
    for cone in builtin_cones(n, **kw):
        if cone.name == name:
            return cone
    raise KeyError(f"unknown cone {name!r}; choose from {CONE_NAMES}")


# --- support level and tangent margins --------------------------------------

def _shift(Rm, mu):
    return Rm + mu * identity_tensor(Rm.n)


def support_level(cone, Rm, hint=None, rtol=1e-12, max_iter=50, return_hint=False):
    """Smallest mu with m(Rm + mu I) >= 0.

    mu -> m(Rm + mu I) is concave and increasing, so Newton's method with
    the active slope approaches the root monotonically from below after the
    first step; for the PIC and PSD cones the slope is constant and one step
    is exact.  If the iteration stalls, the root is bracketed and refined by
    Brent's method.
    """
    scale = frobenius_norm(Rm)
    if scale == 0.0:
        return (0.0, hint) if return_hint else 0.0
    limit = 1e3 * scale
    tol = rtol * scale
    ev = cone.evaluate(Rm, hint)
    mu, hint = 0.0, ev.hint
    for _ in range(max_iter):
        if abs(ev.value) <= tol:
            return (mu, hint) if return_hint else mu
        if ev.slope <= 0:
            break
        mu = mu - ev.value / ev.slope
        if abs(mu) > limit:
            raise NoBracket(f"support level beyond {limit:.3e}")
        ev = cone.evaluate(_shift(Rm, mu), hint)
        hint = ev.hint
    mu = _bracketed_root(cone, Rm, hint, limit, tol)
    return (mu, hint) if return_hint else mu


def _bracketed_root(cone, Rm, hint, limit, tol):
    def g(mu):
        return cone.margin(_shift(Rm, mu), hint)

    scale = frobenius_norm(Rm)
    lo, hi = -scale, scale
    while g(lo) >= 0:
        lo *= 2
        if abs(lo) > limit:
            raise NoBracket("margin stays nonnegative along -I")
    while g(hi) < 0:
        hi *= 2
        if hi > limit:
            raise NoBracket("margin stays negative along +I")
    return float(brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))


def tangent_inward_margin(cone, Rm_boundary, V, eps_rel=1e-5, hint=None, central=True):
    """Directional derivative of the margin at a boundary point along V.

    Forward differences at steps h and h/2 are combined by one Richardson
    extrapolation.  With ``central=True`` the backward estimate is computed
    too; if both agree (no kink of the margin at this point) their mean is
    returned, otherwise the forward value, which is the one-sided derivative
    that decides membership in the tangent cone.
    """
    v = frobenius_norm(V)
    if v == 0.0:
        raise DegenerateDirection("direction has zero norm")
    scale = frobenius_norm(Rm_boundary)
    h = eps_rel * (scale if scale > 0 else 1.0) / v
    ev0 = cone.evaluate(Rm_boundary, hint)
    m0, hint = ev0.value, ev0.hint

    def one_sided(sign):
        d1 = (cone.margin(Rm_boundary + (sign * h) * V, hint) - m0) / (sign * h)
        d2 = (cone.margin(Rm_boundary + (sign * h / 2) * V, hint) - m0) / (sign * h / 2)
        return 2.0 * d2 - d1

    fwd = one_sided(1.0)
    if not central:
        return float(fwd)
    bwd = one_sided(-1.0)
    if abs(fwd - bwd) <= 1e-6 * max(1.0, abs(fwd)):
        return float(0.5 * (fwd + bwd))
    return float(fwd)


# --- sampling ---------------------------------------------------------------

def _child_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def boundary_sample(cone, n, seed, index):
    """Sample ``index`` of the seeded stream, moved onto the cone boundary.

    A weakly PIC tensor is shifted along I by its support level, then nudged
    inside by ``BOUNDARY_OFFSET`` and rescaled to unit norm.  If the cone has
    a ``verify`` evaluation and it finds a negative margin at the placed
    point, the support level is solved again with the verifying evaluation,
    starting from the deeper minimizer.
    """
    rng = _child_rng(seed, index)
    X = random_weakly_pic(n, rng)
    offset = BOUNDARY_OFFSET * frobenius_norm(X)
    mu, hint = support_level(cone, X, return_hint=True)
    if cone.verify is not None:
        strong = ConeSpec(cone.name, cone.verify)
        for _ in range(3):
            ev = cone.verify(_shift(X, mu + offset), hint)
            if ev.value >= 0:
                break
            mu, hint = support_level(strong, X, hint=ev.hint, return_hint=True)
    S = _shift(X, mu + offset)
    return S / frobenius_norm(S), hint


# --- the reaction ODE -------------------------------------------------------

@dataclass
class ODETrajectory:
    """Accepted states of dRm/dt = Q(Rm) with Hermite dense output."""

    times: np.ndarray
    tensors: list
    accepted: int
    rejected: int
    reason: str
    samples: dict = field(default_factory=dict)
    _sol: object = None

    def at(self, t):
        n = self.tensors[0].n
        return CurvatureTensor(self._sol(t).reshape((n,) * 4))

    @property
    def scalars(self):
        return np.array([scalar(T) for T in self.tensors])

    @property
    def end_time(self):
        return float(self.times[-1])


def _hamilton_rhs(n):
    shape = (n,) * 4

    def rhs(t, y):
        return q_components(y.reshape(shape)).ravel()
    return rhs


def integrate_hamilton_ode(Rm0, horizon, rel_tol=1e-10, abs_tol=1e-12, sample_times=None,
                           stop_scalar_factor=None, growth_limit=1e6, fixed_step=None):
    """Integrate dRm/dt = Q(Rm) from Rm0 up to ``horizon``.

    Terminates at the horizon, when |Rm| exceeds ``growth_limit * |Rm0|``
    (reason ``"blowup"``), or, if ``stop_scalar_factor`` is given, when the
    scalar curvature reaches that multiple of its initial value (reason
    ``"event"``).  ``sample_times`` inside the integrated range are filled
    from the dense output.
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    n = Rm0.n
    event = None
    if stop_scalar_factor is not None:
        R0 = scalar(Rm0)
        target = stop_scalar_factor * R0

        def event(t, y):
            return float(np.einsum("ijij->", y.reshape((n,) * 4)) - target)
    sol = integrate(_hamilton_rhs(n), 0.0, Rm0.components.ravel(), horizon, rtol=rel_tol,
                    atol=abs_tol, growth_limit=growth_limit, event=event, fixed_step=fixed_step)
    reason = "scalar-doubling" if sol.reason == "event" else sol.reason
    tensors = [CurvatureTensor(y.reshape((n,) * 4)) for y in sol.y]
    traj = ODETrajectory(sol.t, tensors, sol.accepted, sol.rejected, reason, _sol=sol)
    if sample_times is not None:
        for t in sample_times:
            if 0.0 <= t <= traj.end_time:
                traj.samples[float(t)] = traj.at(t)
    return traj


def _flow_step(R, h):
    """One classical RK4 step of dR/dt = Q(R) on raw components."""
    k1 = q_components(R)
    k2 = q_components(R + 0.5 * h * k1)
    k3 = q_components(R + 0.5 * h * k2)
    k4 = q_components(R + h * k3)
    return R + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# --- invariance experiments -------------------------------------------------

def _trajectory_margins(cone, Rm0, horizon_scale, checkpoints, rel_tol, abs_tol, hint):
    R0 = scalar(Rm0)
    horizon = horizon_scale / max(R0, 1e-300) if R0 > 0 else horizon_scale
    traj = integrate_hamilton_ode(Rm0, horizon, rel_tol, abs_tol, stop_scalar_factor=2.0)
    ts = np.linspace(0.0, traj.end_time, checkpoints + 1)
    worst = np.inf
    for t in ts:
        Rm = traj.at(t)
        ev = cone.evaluate(Rm, hint)
        hint = ev.hint
        worst = min(worst, ev.value / frobenius_norm(Rm))
    scal = traj.scalars
    tol = 1e-9 * np.maximum(1.0, np.abs(scal[1:]))
    return {
        "scalar0": float(R0),
        "t_end": traj.end_time,
        "reason": traj.reason,
        "steps": int(traj.accepted),
        "min_margin": float(worst),
        "scalar_monotone": bool(np.all(np.diff(scal) >= -tol)),
    }


def _invariance_row(args):
    cone_name, n, seed, index, horizon_scale, checkpoints, rel_tol, abs_tol = args
    cone = get_cone(cone_name, n)
    S, hint = boundary_sample(cone, n, seed, index)
    row = {"index": index}
    row.update(_trajectory_margins(cone, S, horizon_scale, checkpoints, rel_tol, abs_tol, hint))
    row["violation"] = row["min_margin"] < -VIOLATION_TOL
    return row


def _workers():
    try:
        return max(1, int(os.environ.get("PICFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _map(func, jobs, workers=None):
    workers = _workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, jobs))


def _histogram(values, bins=10):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"edges": [], "counts": []}
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def invariance_experiment(cone, n, samples, horizon_scale=10.0, seed=0, checkpoints=12,
                          rel_tol=1e-10, abs_tol=1e-12, workers=None):
    """Flow boundary samples of a builtin cone and record the worst margin.

    Each sample (unit norm, just inside the boundary) is integrated until its
    scalar curvature doubles or ``horizon_scale / R(0)`` elapses.  The margin,
    relative to |Rm(t)|, is evaluated at ``checkpoints + 1`` equally spaced
    times with warm starts from the previous minimizer.  A violation is a
    relative margin below ``-VIOLATION_TOL``.
    """
    name = cone if isinstance(cone, str) else cone.name
    if name not in CONE_NAMES:
        raise KeyError(f"invariance experiments run on builtin cones {CONE_NAMES}")
    jobs = [(name, n, seed, i, horizon_scale, checkpoints, rel_tol, abs_tol)
            for i in range(samples)]
    rows = _map(_invariance_row, jobs, workers)
    margins = [r["min_margin"] for r in rows]
    return {
        "cone": name,
        "n": int(n),
        "samples": int(samples),
        "seed": int(seed),
        "horizon_scale": float(horizon_scale),
        "violations": int(sum(r["violation"] for r in rows)),
        "min_margin": float(min(margins)) if margins else None,
        "scalar_monotone": bool(all(r["scalar_monotone"] for r in rows)),
        "histogram": _histogram(margins),
        "tau_hat": None,
        "rows": rows,
    }


def _tau_row(args):
    cone_name, n, seed, index, tol = args
    cone = get_cone(cone_name, n)
    S, hint = boundary_sample(cone, n, seed, index)
    return {"index": index, "tau": sample_tau(cone, S, hint=hint, tol=tol)}


def sample_tau(cone, Rm, hint=None, tol=1e-6):
    """Largest tau with Q(Rm) - tau R^2 I in the tangent cone at Rm.

    The forward directional derivative is concave and decreasing in tau, so
    the root is bracketed by doubling and refined by Brent's method.
    Returns ``inf`` when R = 0.
    """
    R = scalar(Rm)
    if R == 0.0:
        return float("inf")
    Q = q_reaction(Rm)
    I = identity_tensor(Rm.n)
    hint = cone.evaluate(Rm, hint).hint

    def phi(tau):
        return tangent_inward_margin(cone, Rm, Q - (tau * R * R) * I, hint=hint, central=False)

    lo, hi = 0.0, 1.0
    if phi(0.0) < 0:
        lo, hi = -1.0, 0.0
        while phi(lo) < 0:
            lo *= 2
            if lo < -1e6:
                raise NoBracket("tangent margin stays negative")
    else:
        while phi(hi) >= 0:
            lo, hi = hi, 2 * hi
            if hi > 1e6:
                raise NoBracket("tangent margin stays nonnegative")
    return float(brentq(phi, lo, hi, xtol=tol, rtol=1e-10))


def transversality_tau(cone, n, samples, seed=0, tol=1e-6, workers=None):
    """Minimum over boundary samples of the largest admissible tau."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    name = cone if isinstance(cone, str) else cone.name
    jobs = [(name, n, seed, i, tol) for i in range(samples)]
    rows = _map(_tau_row, jobs, workers)
    taus = [r["tau"] for r in rows]
    return {
        "cone": name,
        "n": int(n),
        "samples": int(samples),
        "seed": int(seed),
        "tau_hat": float(min(taus)),
        "rows": rows,
    }


# --- four-dimensional pinching along the ODE --------------------------------

def reaction_margins(R, h):
    """Finite-difference checks of the block evolution inequalities at R.

    Returns ``da1 - (a1^2 + b1^2 + 2 a2 a3)``,
    ``dc1 - (c1^2 + b1^2 + 2 c2 c3)`` and
    ``b3 (a3 + c3) + 2 b1 b2 - db3``, all nonnegative when the inequalities
    hold, plus the scale a1^2 + b1^2 + 2 a2 a3 for relative comparisons.
    """
    bp = fourd.block_decomp(CurvatureTensor(_flow_step(R, h)))
    bm = fourd.block_decomp(CurvatureTensor(_flow_step(R, -h)))
    bd = fourd.block_decomp(CurvatureTensor(R))
    a, b, c = bd.a, bd.b, bd.c
    da1 = (bp.a[0] - bm.a[0]) / (2 * h)
    dc1 = (bp.c[0] - bm.c[0]) / (2 * h)
    db3 = (bp.b[2] - bm.b[2]) / (2 * h)
    rhs_a = a[0] ** 2 + b[0] ** 2 + 2 * a[1] * a[2]
    rhs_c = c[0] ** 2 + b[0] ** 2 + 2 * c[1] * c[2]
    rhs_b = b[2] * (a[2] + c[2]) + 2 * b[0] * b[1]
    return {
        "a1": float(da1 - rhs_a),
        "c1": float(dc1 - rhs_c),
        "b3": float(rhs_b - db3),
        "da1": float(da1),
        "rhs_a1": float(rhs_a),
    }


def pinching_trajectories(Rm0, horizon=None, checkpoints=24, K=None, rel_tol=1e-10,
                          abs_tol=1e-12, fd_scale=1e-4):
    """Block eigenvalues, pinching quantities and reaction checks along the ODE.

    Integrates until the scalar curvature doubles (or ``horizon``) and
    samples ``checkpoints + 1`` equally spaced times.  ``K`` for the
    restricted pinching set defaults to the value computed at t = 0.
    Time derivatives are central differences over one RK4 step of size
    ``fd_scale / |Rm(t)|`` in each direction.
    """
    if Rm0.n != 4:
        raise DimensionNot4(f"pinching needs n = 4, got n = {Rm0.n}")
    R0 = scalar(Rm0)
    if horizon is None:
        horizon = 10.0 / R0 if R0 > 0 else 1.0
    if K is None:
        K = fourd.pinching_report(Rm0)["K"]
    traj = integrate_hamilton_ode(Rm0, horizon, rel_tol, abs_tol,
                                  stop_scalar_factor=2.0 if R0 > 0 else None)
    ts = np.linspace(0.0, traj.end_time, checkpoints + 1)
    rows = []
    for t in ts:
        Rm = traj.at(t)
        nrm = frobenius_norm(Rm)
        bd = fourd.block_decomp(Rm)
        rep = fourd.pinching_from_blocks(bd)
        restricted = (fourd.restricted_pinching_margins(bd, K) if np.isfinite(K)
                      else (np.nan, np.nan, np.nan))
        react = reaction_margins(Rm.components, fd_scale / max(nrm, 1e-300))
        rows.append({
            "t": float(t),
            "norm": nrm,
            "scalar": scalar(Rm),
            "a": bd.a.tolist(),
            "b": bd.b.tolist(),
            "c": bd.c.tolist(),
            "lemma41_a": rep["lemma41_a"],
            "lemma41_c": rep["lemma41_c"],
            "lemma42": rep["lemma42"],
            "lemma43": rep["lemma43"],
            "restricted": [float(x) for x in restricted],
            "psd_lemma43": [float(bd.a[0]), float(bd.c[0]),
                            float(bd.a[0] * bd.c[0] - bd.b[2] ** 2)],
            "reaction": react,
        })
    return {"K": float(K), "t_end": traj.end_time, "reason": traj.reason, "rows": rows}


def pinched_samples(count, seed, max_tries=100000):
    """n = 4 tensors that are strictly PIC and satisfy the restricted pinching
    a3 <= K a1, c3 <= K c1, b3^2 <= a1 c1 with K from their own ratio."""
    out = []
    for i in range(max_tries):
        rng = _child_rng(seed, i)
        X = random_weakly_pic(4, rng)
        X = X + rng.uniform(0.0, 0.3) * identity_tensor(4)
        X = X / frobenius_norm(X)
        rep = fourd.pinching_report(X)
        if rep["restricted_ok"]:
            out.append(X)
            if len(out) == count:
                return out
    raise RuntimeError("could not draw enough pinched samples")


# --- scalar comparison ODEs -------------------------------------------------

def comparison_bound(t, C, Ar, delta):
    """min(-4/(t delta), -sqrt(2) C / ((Ar)^2 delta))."""
    t = np.asarray(t, dtype=float)
    return np.minimum(-4.0 / (t * delta), -np.sqrt(2.0) * C / (Ar ** 2 * delta))


def comparison_ode(u0, C, Ar, delta=1.0, horizon=10.0, grid=400, tol=1e-8):
    """Integrate u' = delta (u^2/2 - C^2 / (2 delta^2 (Ar)^4)) and test the lower bound."""
    if not (Ar > 0 and delta > 0 and horizon > 0):
        raise ValueError("Ar, delta and horizon must be positive")
    c2 = C * C / (2.0 * delta * delta * Ar ** 4)

    def rhs(t, u):
        return delta * (0.5 * u * u - c2)

    # blowup guard measured against the larger of |u0| and the equilibrium scale
    scale = max(abs(u0), np.sqrt(2.0 * c2))
    growth = 1e6 * scale / abs(u0) if u0 != 0 and scale > 0 else np.inf
    sol = integrate(rhs, 0.0, [u0], horizon, rtol=1e-12, atol=1e-14, growth_limit=growth)
    t_end = sol.t[-1]
    grid_t = np.unique(np.concatenate([np.linspace(0.0, t_end, grid + 1)[1:], sol.t[1:]]))
    u = sol(grid_t)[:, 0]
    bound = comparison_bound(grid_t, C, Ar, delta)
    gap = u - bound
    return {
        "t": grid_t,
        "u": u,
        "bound": bound,
        "min_gap": float(gap.min()),
        "bound_ok": bool(np.all(gap >= -tol)),
        "reason": sol.reason,
    }


def ancient_blowup_check(f0, delta):
    """Backward blowup of f' = delta f^2 from f(0) = f0 < 0.

    The closed form f = f0 / (1 - delta f0 t) blows up at t* = 1/(delta f0);
    the integration runs backwards until |f| exceeds 10^6 |f0|.
    """
    if not (f0 < 0 and delta > 0):
        raise ValueError("need f0 < 0 and delta > 0")
    t_star = 1.0 / (delta * f0)
    sol = integrate(lambda t, y: delta * y * y, 0.0, [f0], 100.0 * t_star,
                    rtol=1e-10, atol=1e-14 * abs(f0))
    t_hit = float(sol.t[-1])
    return {
        "t_star": float(t_star),
        "t_detected": t_hit,
        "reason": sol.reason,
        "relative_error": abs(t_hit - t_star) / abs(t_star),
        "within_1pct": sol.reason == "blowup" and abs(t_hit - t_star) <= 0.01 * abs(t_star),
    }
