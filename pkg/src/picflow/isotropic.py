"""Isotropic curvature conditions evaluated over orthonormal 4-frames.

For a frame (e1, e2, e3, e4) and lam, mu in [-1, 1] the isotropic value is

    R1313 + lam^2 R1414 + mu^2 R2323 + lam^2 mu^2 R2424 - 2 lam mu R1234

with lam = mu = 1 for PIC, mu = 1 for PIC1 and both free for PIC2.  Minima
over frames are found by multistart Riemannian gradient descent on the
Stiefel manifold V_4(R^n) (QR retraction, Barzilai-Borwein steps with
Armijo backtracking).  For a fixed frame the value is biquadratic in
(lam, mu) and is minimized exactly, one coordinate at a time.
"""

from dataclasses import dataclass

import numpy as np

from . import fourd
from .errors import (DimensionNot4, DimensionOutOfRange, FrameNotOrthonormal,
                     NonpositiveScalar, NotStrictlyPIC)
from .tensor import CurvatureTensor, frobenius_norm, ricci, scalar

MODES = ("PIC", "PIC1", "PIC2")
FRAME_TOL = 1e-10
WEAK_TOL = 1e-6  # condition holds iff minimum >= -WEAK_TOL * |Rm|

# frame index tuples of the five components that enter the isotropic value
_C13, _C14, _C23, _C24, _C1234 = (0, 2, 0, 2), (0, 3, 0, 3), (1, 2, 1, 2), (1, 3, 1, 3), (0, 1, 2, 3)


def _symmetrized_weight(idx):
    """Weight tensor W with sum W_abcd T_abcd = T[idx], averaged over the
    symmetry group of curvature tensors so the gradient formula is uniform."""
    W = np.zeros((4, 4, 4, 4))
    a, b, c, d = idx
    for (p, q, r, s), sign in (((a, b, c, d), 1), ((b, a, c, d), -1), ((a, b, d, c), -1), ((b, a, d, c), 1),
                               ((c, d, a, b), 1), ((d, c, a, b), -1), ((c, d, b, a), -1), ((d, c, b, a), 1)):
        W[p, q, r, s] += sign / 8.0
    return W


_W = np.array([_symmetrized_weight(i) for i in (_C13, _C14, _C23, _C24, _C1234)])


def check_frame(frame, n=None):
    F = np.asarray(frame, dtype=float)
    if F.ndim != 2 or F.shape[0] != 4 or (n is not None and F.shape[1] != n):
        raise FrameNotOrthonormal(f"frame must have shape (4, {n}), got {F.shape}")
    err = np.abs(F @ F.T - np.eye(4)).max()
    if err > FRAME_TOL:
        raise FrameNotOrthonormal(f"Gram matrix deviates from identity by {err:.3e}")
    return F


def frame_components(R, F):
    """The five components (R1313, R1414, R2323, R2424, R1234) for frames ``F``.

    ``F`` has shape ``(4, n)`` or ``(s, 4, n)``; output shape ``(5,)`` or ``(s, 5)``.
    """
    F = np.asarray(F)
    single = F.ndim == 2
    if single:
        F = F[None]
    n = R.shape[0]
    M = R.reshape(n * n, n * n)
    u = np.einsum("sai,sbj->sabij", F, F).reshape(F.shape[0], 4, 4, n * n)
    Mu = np.einsum("pq,sabq->sabp", M, u)
    out = np.stack([
        np.einsum("sp,sp->s", u[:, 0, 2], Mu[:, 0, 2]),
        np.einsum("sp,sp->s", u[:, 0, 3], Mu[:, 0, 3]),
        np.einsum("sp,sp->s", u[:, 1, 2], Mu[:, 1, 2]),
        np.einsum("sp,sp->s", u[:, 1, 3], Mu[:, 1, 3]),
        np.einsum("sp,sp->s", u[:, 0, 1], Mu[:, 2, 3]),
    ], axis=-1)
    return out[0] if single else out


def _combine(t, lam, mu):
    l2, m2 = lam * lam, mu * mu
    return t[..., 0] + l2 * t[..., 1] + m2 * t[..., 2] + l2 * m2 * t[..., 3] - 2.0 * lam * mu * t[..., 4]


def isotropic_value(Rm, frame, lam=1.0, mu=1.0):
    F = check_frame(frame, Rm.n)
    if not (-1.0 <= lam <= 1.0 and -1.0 <= mu <= 1.0):
        raise ValueError("lam and mu must lie in [-1, 1]")
    return float(_combine(frame_components(Rm.components, F), lam, mu))


def _argmin_quadratic(alpha, beta, current):
    """argmin over [-1, 1] of alpha x^2 - 2 beta x (vectorized)."""
    interior = np.clip(beta / np.where(alpha > 1e-15, alpha, 1.0), -1.0, 1.0)
    edge = np.where(beta > 0, 1.0, np.where(beta < 0, -1.0, np.where(current >= 0, 1.0, -1.0)))
    return np.where(alpha > 1e-15, interior, edge)


def _optimize_lam_mu(t, lam, mu, mode, sweeps=8):
    if mode == "PIC":
        return lam, mu
    for _ in range(sweeps):
        lam = _argmin_quadratic(t[:, 1] + mu * mu * t[:, 3], mu * t[:, 4], lam)
        if mode == "PIC2":
            mu = _argmin_quadratic(t[:, 2] + lam * lam * t[:, 3], lam * t[:, 4], mu)
    return lam, mu


def _value_and_grad(R, X, lam, mu):
    """Objective and Euclidean gradient for a batch of frames ``X`` (s, 4, n).

    With W the symmetrized weight, f = sum W_abcd R(X_a, X_b, X_c, X_d) and
    df/dX_a = 4 sum W_abcd R(., X_b, X_c, X_d).
    """
    s, _, n = X.shape
    Xt = np.swapaxes(X, 1, 2)
    Y = R.reshape(n ** 3, n) @ X.reshape(s * 4, n).T
    Y = Y.reshape(n, n, n, s, 4).transpose(3, 0, 1, 4, 2).reshape(s, n * n * 4, n)
    Y = (Y @ Xt).reshape(s, n, n, 4, 4)  # [s, i, j, d, c]
    Y = Y.transpose(0, 1, 3, 4, 2).reshape(s, n * 16, n)
    Y = (Y @ Xt).reshape(s, n, 4, 4, 4)  # [s, i, d, c, b]
    Y = Y.transpose(0, 1, 4, 3, 2).reshape(s, n, 64)
    l2, m2 = lam * lam, mu * mu
    coef = np.stack([np.ones_like(lam), l2, m2, l2 * m2, -2.0 * lam * mu], axis=-1)
    W = (coef @ _W.reshape(5, 256)).reshape(s, 4, 64)
    G = 4.0 * W @ np.swapaxes(Y, 1, 2)
    f = np.einsum("sai,sai->s", G, X) / 4.0
    return f, G


def _retract(X):
    """QR retraction of row-frames (s, 4, n) back onto the Stiefel manifold."""
    Qm, Rr = np.linalg.qr(np.swapaxes(X, 1, 2))
    signs = np.sign(np.diagonal(Rr, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return np.swapaxes(Qm * signs[:, None, :], 1, 2)


def _tangent(X, G):
    """Project Euclidean gradients onto the tangent space of V_4(R^n)."""
    XG = np.einsum("sai,sbi->sab", X, G)
    return G - np.einsum("sab,sbi->sai", 0.5 * (XG + np.swapaxes(XG, 1, 2)), X)


def random_frames(n, count, rng):
    return _retract(rng.standard_normal((count, 4, n)))


def _descend(R, X, lam, mu, mode, max_iter, gtol):
    s = X.shape[0]
    lam, mu = _optimize_lam_mu(frame_components(R, X), lam, mu, mode)
    f, G = _value_and_grad(R, X, lam, mu)
    D = _tangent(X, G)
    step = np.full(s, 0.1)
    active = np.ones(s, dtype=bool)
    converged = np.zeros(s, dtype=bool)
    for _ in range(max_iter):
        gnorm2 = np.einsum("sai,sai->s", D, D)
        done = gnorm2 <= gtol * gtol
        converged |= done & active
        active &= ~done
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Xa, Da, fa, ta = X[idx], D[idx], f[idx], step[idx]
        la, ma = lam[idx], mu[idx]
        accepted = np.zeros(idx.size, dtype=bool)
        Xn, fn = Xa.copy(), fa.copy()
        for _ in range(25):
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            Xt = _retract(Xa[todo] - ta[todo, None, None] * Da[todo])
            ft, _ = _value_and_grad(R, Xt, la[todo], ma[todo])
            ok = ft <= fa[todo] - 1e-4 * ta[todo] * gnorm2[idx][todo]
            acc = todo[ok]
            Xn[acc], fn[acc] = Xt[ok], ft[ok]
            accepted[acc] = True
            ta[todo[~ok]] *= 0.5
        stalled = ~accepted
        if stalled.any():
            # no sufficient decrease at any step size: stationary to precision
            converged[idx[stalled]] = True
            active[idx[stalled]] = False
        acc = np.flatnonzero(accepted)
        if acc.size == 0:
            continue
        ia = idx[acc]
        Xn_a = Xn[acc]
        la2, ma2 = _optimize_lam_mu(frame_components(R, Xn_a), la[acc], ma[acc], mode)
        fa2, Ga2 = _value_and_grad(R, Xn_a, la2, ma2)
        Dn = _tangent(Xn_a, Ga2)
        # Barzilai-Borwein step from the frame and gradient differences
        S = Xn_a - X[ia]
        Yd = Dn - D[ia]
        sy = np.abs(np.einsum("sai,sai->s", S, Yd))
        ss = np.einsum("sai,sai->s", S, S)
        bb = np.where(sy > 1e-300, ss / np.maximum(sy, 1e-300), 1.0)
        step[ia] = np.clip(bb, 1e-6, 10.0)
        X[ia], f[ia], D[ia], lam[ia], mu[ia] = Xn_a, fa2, Dn, la2, ma2
    return X, lam, mu, f, converged


def _chart_basis(X):
    """Tangent directions at a frame X (4, n): rotations inside the frame
    span and towards each vector of an orthonormal complement."""
    n = X.shape[1]
    Q, _ = np.linalg.qr(X.T, mode="complete")
    comp = Q[:, 4:].T
    B = []
    for a in range(4):
        for b in range(a + 1, 4):
            D = np.zeros((4, n))
            D[a], D[b] = X[b], -X[a]
            B.append(D)
    for a in range(4):
        for v in comp:
            D = np.zeros((4, n))
            D[a] = v
            B.append(D)
    return np.array(B)


def _lam_mu_grad(t, lam, mu):
    dl = 2 * lam * t[1] + 2 * lam * mu * mu * t[3] - 2 * mu * t[4]
    dm = 2 * mu * t[2] + 2 * lam * lam * mu * t[3] - 2 * lam * t[4]
    return dl, dm


def _newton_polish(R, X, lam, mu, mode, iters=12, h=1e-3):
    """Newton iterations in a local chart around a frame (plus free lam, mu).

    The gradient is analytic; the Hessian comes from one batch of central
    differences of the value.  Indefinite Hessians are replaced by their
    absolute value, and each step is followed by a batched backtracking
    search that keeps the best point.
    """
    f0 = float(_combine(frame_components(R, X), lam, mu))
    for _ in range(iters):
        B = _chart_basis(X)
        d = B.shape[0]
        t = frame_components(R, X)
        _, G = _value_and_grad(R, X[None], np.array([lam]), np.array([mu]))
        grad = [np.einsum("ai,kai->k", G[0], B)]
        dl, dm = _lam_mu_grad(t, lam, mu)
        extra = []
        if mode != "PIC" and (abs(lam) < 1 or dl * lam > 0):
            extra.append(("lam", dl))
        if mode == "PIC2" and (abs(mu) < 1 or dm * mu > 0):
            extra.append(("mu", dm))
        g = np.concatenate(grad + [np.array([e[1] for e in extra])])
        m = g.size

        def points(Z):
            Z = np.atleast_2d(Z)
            Xs = _retract(X[None] + np.einsum("sk,kai->sai", Z[:, :d], B))
            ls = np.full(Z.shape[0], lam)
            ms = np.full(Z.shape[0], mu)
            for j, (name, _) in enumerate(extra):
                if name == "lam":
                    ls = np.clip(lam + Z[:, d + j], -1.0, 1.0)
                else:
                    ms = np.clip(mu + Z[:, d + j], -1.0, 1.0)
            return Xs, ls, ms

        def values(Z):
            Xs, ls, ms = points(Z)
            return _combine(frame_components(R, Xs), ls, ms)

        E = np.eye(m) * h
        iu, ju = np.triu_indices(m, 1)
        Z = np.concatenate([E, -E, E[iu] + E[ju], -E[iu] - E[ju]])
        v = values(Z)
        fp, fm = v[:m], v[m:2 * m]
        fpp, fmm = v[2 * m:2 * m + iu.size], v[2 * m + iu.size:]
        H = np.diag((fp - 2 * f0 + fm) / h ** 2)
        off = (fpp - fp[iu] - fp[ju] + 2 * f0 - fm[iu] - fm[ju] + fmm) / (2 * h * h)
        H[iu, ju] = off
        H[ju, iu] = off
        w, V = np.linalg.eigh(H)
        w = np.maximum(np.abs(w), 1e-8 * max(np.abs(w).max(), 1e-12))
        step = -V @ ((V.T @ g) / w)
        norm = np.linalg.norm(step)
        if norm > 0.5:
            step *= 0.5 / norm
        alphas = 0.5 ** np.arange(14)
        Zs = alphas[:, None] * step[None]
        Xs, ls, ms = points(Zs)
        fs = _combine(frame_components(R, Xs), ls, ms)
        k = int(np.argmin(fs))
        if not fs[k] < f0:
            break
        X, lam, mu, gain = Xs[k], float(ls[k]), float(ms[k]), f0 - fs[k]
        f0 = float(fs[k])
        if gain < 1e-15:
            break
    return X, lam, mu, f0


@dataclass(frozen=True)
class IsotropicReport:
    mode: str
    minimum: float
    frame: np.ndarray
    lam: float
    mu: float
    budget: int
    converged: bool
    seed: int

    def to_dict(self):
        return {
            "mode": self.mode,
            "minimum": float(self.minimum),
            "frame": [list(map(float, row)) for row in self.frame],
            "lambda": float(self.lam),
            "mu": float(self.mu),
            "budget": int(self.budget),
            "converged": bool(self.converged),
        }


def _screen(R, n, mode, count, rng):
    X = random_frames(n, count, rng)
    t = frame_components(R, X)
    ones = np.ones(count)
    lam, mu = _optimize_lam_mu(t, ones.copy(), ones.copy(), mode)
    return X, _combine(t, lam, mu)


def min_isotropic(Rm, mode="PIC", budget=8, seed=0, init_frames=None, max_iter=60,
                  screen_factor=32, gtol=1e-5, polish=3):
    """Minimize the isotropic value over orthonormal 4-frames.

    Starts are the ``budget`` best of ``screen_factor * budget`` uniformly
    random frames, plus any ``init_frames`` (warm starts).  PIC1 and PIC2
    also restart from the optimized frames of the lower modes, so that
    ``PIC2 <= PIC1 <= PIC`` holds exactly for a fixed seed.  After the
    first-order descent of each stage, the ``polish`` best starts are
    refined by Newton iterations.

    The reported minimum is attained by the returned frame, hence it is an
    upper bound on the true minimum.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = Rm.n
    if n < 4:
        raise DimensionOutOfRange("isotropic curvature needs n >= 4")
    scale = frobenius_norm(Rm)
    rng = np.random.default_rng(seed)
    if scale == 0.0:
        F = random_frames(n, 1, rng)[0]
        return IsotropicReport(mode, 0.0, F, 1.0, 1.0, budget, True, seed)
    R = Rm.components / scale

    warm = None
    if init_frames is not None:
        warm = np.asarray(init_frames, dtype=float).reshape(-1, 4, n)
        warm = _retract(warm)

    prev = None
    for stage in MODES[:MODES.index(mode) + 1]:
        Xs, vals = _screen(R, n, stage, screen_factor * budget, rng)
        order = np.argsort(vals, kind="stable")[:budget]
        starts = [Xs[order]]
        if warm is not None:
            starts.append(warm)
        if prev is not None:
            starts.append(prev[0])
        X0 = np.concatenate(starts)
        lam0 = np.ones(X0.shape[0])
        mu0 = np.ones(X0.shape[0])
        if prev is not None:
            k = prev[0].shape[0]
            lam0[-k:], mu0[-k:] = prev[1], prev[2]
        X, lam, mu, f, conv = _descend(R, X0, lam0, mu0, stage, max_iter, gtol)
        for i in np.argsort(f, kind="stable")[:polish]:
            X[i], lam[i], mu[i], f[i] = _newton_polish(R, X[i], lam[i], mu[i], stage)
        prev = (X, lam, mu, f, conv)

    X, lam, mu, f, conv = prev
    best = int(np.argmin(f))  # argmin returns the first index on ties
    F = X[best]
    value = float(_combine(frame_components(Rm.components, F), lam[best], mu[best]))
    return IsotropicReport(mode, value, F, float(lam[best]), float(mu[best]), budget,
                           bool(conv[best]), seed)


def holds_weakly(Rm, mode="PIC", **kw):
    rep = min_isotropic(Rm, mode, **kw)
    return rep.minimum >= -WEAK_TOL * frobenius_norm(Rm)


def uniform_pic_theta(Rm, **kw):
    """theta = min isotropic value / (4 R); positive iff uniformly PIC."""
    if Rm.n < 5:
        raise DimensionOutOfRange("theta is defined for n >= 5; use uniform_pic_lambda4 for n = 4")
    R = scalar(Rm)
    if R <= 0:
        raise NonpositiveScalar(f"scalar curvature {R:.6g} is not positive")
    m = min_isotropic(Rm, "PIC", **kw).minimum
    if abs(m) <= WEAK_TOL * frobenius_norm(Rm):
        return 0.0
    return m / (4.0 * R)


def uniform_pic_lambda4(Rm):
    """max(a3, b3, c3) / min(a1 + a2, c1 + c2) for n = 4."""
    if Rm.n != 4:
        raise DimensionNot4(f"Lambda is defined for n = 4, got n = {Rm.n}")
    bd = fourd.block_decomp(Rm)
    den = bd.pic_margin()
    if den <= fourd.RATIO_TOL * max(bd.norm, 1e-300):
        raise NotStrictlyPIC(f"min(a1 + a2, c1 + c2) = {den:.3e}")
    return float(max(bd.a[2], bd.b[2], bd.c[2]) / den)


def ricci_eigenvalues(Rm):
    return np.linalg.eigvalsh(ricci(Rm))


def two_positive_ricci_margin(Rm, delta):
    """(lam1 + lam2) - delta R for the two smallest Ricci eigenvalues."""
    ev = ricci_eigenvalues(Rm)
    return float(ev[0] + ev[1] - delta * ev.sum())


def empirical_two_ricci_delta(tensors):
    """Largest delta with lam1 + lam2 >= delta R over a sample set."""
    ratios = []
    for Rm in tensors:
        ev = ricci_eigenvalues(Rm)
        R = ev.sum()
        if R > 0:
            ratios.append((ev[0] + ev[1]) / R)
    return float(min(ratios)) if ratios else float("nan")


def weak_pic_proof_inequalities(Rm):
    """Check R_ii >= -R/(n-4), R - 2 R_nn >= 0 and |Ric|^2 <= n R^2."""
    n = Rm.n
    if n < 5:
        raise DimensionOutOfRange("needs n >= 5")
    ev = ricci_eigenvalues(Rm)
    R = float(ev.sum())
    tol = 1e-9 * max(1.0, frobenius_norm(Rm)) ** 2
    margins = {
        "ricci_lower": float(ev[0] + R / (n - 4)),
        "top_ricci": float(R - 2.0 * ev[-1]),
        "ricci_norm": float(n * R * R - np.sum(ev ** 2)),
    }
    return {k: {"margin": v, "holds": v >= -tol} for k, v in margins.items()}


SAMPLER_PERTURBATION = 0.05


def random_weakly_pic(n, rng, max_models=3, perturbation=SAMPLER_PERTURBATION,
                      budget=4, max_tries=1000):
    """Random weakly PIC tensor with |Rm| = 1.

    A convex combination of up to ``max_models`` randomly rotated model
    tensors (sphere, S^k x R^{n-k}, curved Kahler surfaces times a flat
    factor), plus a Gaussian curvature tensor of norm at most
    ``perturbation``, kept only if the isotropic minimum is nonnegative.
    """
    from .models import weakly_pic_models
    from .tensor import project_curvature, random_rotation

    models = list(weakly_pic_models(n).values())
    for _ in range(max_tries):
        k = int(rng.integers(1, max_models + 1))
        picks = rng.integers(0, len(models), size=k)
        weights = rng.dirichlet(np.ones(k))
        X = CurvatureTensor(np.zeros((n,) * 4))
        for w, p in zip(weights, picks):
            T = models[p]
            X = X + w * (T / frobenius_norm(T)).rotate(random_rotation(n, rng))
        X = X / frobenius_norm(X)
        G = project_curvature(rng.standard_normal((n,) * 4))
        G *= rng.uniform(0.0, perturbation) / np.sqrt(np.sum(G ** 2))
        X = X + CurvatureTensor(G)
        X = X / frobenius_norm(X)
        seed = int(rng.integers(0, 2 ** 32))
        if min_isotropic(X, "PIC", budget=budget, seed=seed).minimum >= 0.0:
            return X
    raise RuntimeError("sampler rejected every draw")
