"""Model geometries: space forms, cylinders, Kahler products, the Bryant soliton.

Pointwise models are algebraic curvature tensors.  Rotationally symmetric
metrics ``g = ds^2 + phi(s)^2 g_{S^{n-1}}`` are sampled on a grid as a
:class:`WarpedMetric`, from which pointwise tensors and volume ratios of
metric balls are extracted.

Factor tensors of dimension 2 or 3 (for instance CP^1) are plain
:class:`CurvatureTensor` objects; only the assembled products are subject to
the ``4 <= n <= 12`` range.
"""

from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (BallExceedsGrid, BoundaryNode, DimensionOutOfRange,
                     NonpositiveTau, ShootingDivergence)
from .tensor import (MAX_DIM, CurvatureTensor, _check_dim, _identity_components,
                     kulkarni_nomizu)


# --- pointwise models -------------------------------------------------------

def space_form(n, kappa=1.0):
    """kappa * I, the curvature of the sphere of sectional curvature kappa."""
    _check_dim(n)
    return CurvatureTensor(kappa * _identity_components(n))


def sphere_factor(k, kappa=1.0):
    """Constant-curvature factor of any dimension k >= 2 (for products)."""
    if not (2 <= k <= MAX_DIM):
        raise DimensionOutOfRange(f"sphere factor dimension {k} outside [2, {MAX_DIM}]")
    return CurvatureTensor(kappa * _identity_components(k))


def flat_factor(k):
    if not (1 <= k <= MAX_DIM):
        raise DimensionOutOfRange(f"flat factor dimension {k} outside [1, {MAX_DIM}]")
    return CurvatureTensor(np.zeros((k,) * 4))


def product(*factors):
    """Riemannian product: factors placed block-diagonally, no mixed terms."""
    dims = [f.n for f in factors]
    n = sum(dims)
    if n > MAX_DIM:
        raise DimensionOutOfRange(f"product dimension {n} exceeds {MAX_DIM}")
    R = np.zeros((n,) * 4)
    o = 0
    for f, k in zip(factors, dims):
        sl = slice(o, o + k)
        R[sl, sl, sl, sl] = f.components
        o += k
    return CurvatureTensor(R)


def cylinder(n, kappa=1.0):
    """S^{n-1}(kappa) x R, equal to (kappa/2) P o P with P of rank n-1."""
    _check_dim(n)
    return product(sphere_factor(n - 1, kappa), flat_factor(1))


def cylinder_kn(n, kappa=1.0):
    """Same tensor as :func:`cylinder`, built from the Kulkarni-Nomizu product."""
    P = np.diag([1.0] * (n - 1) + [0.0])
    return kulkarni_nomizu(P, P) * (0.5 * kappa)


def shrinking_cylinder(n, tau):
    """Cylinder with sphere curvature 1/(2(n-2)tau).

    This radius law makes the family solve dRm/dtau = -Q(Rm), i.e. the
    curvature ODE run backwards in tau = T - t.
    """
    if not tau > 0:
        raise NonpositiveTau(f"tau must be positive, got {tau!r}")
    return cylinder(n, 1.0 / (2.0 * (n - 2) * tau))


_J0 = np.array([[0.0, -1.0], [1.0, 0.0]])  # J e1 = e2


def standard_complex_structure(m):
    """Block-diagonal J on R^{2m} with J e_{2i-1} = e_{2i}."""
    J = np.zeros((2 * m, 2 * m))
    for i in range(m):
        J[2 * i:2 * i + 2, 2 * i:2 * i + 2] = _J0
    return J


def fubini_study(m):
    """CP^m with holomorphic sectional curvature 4, and its complex structure.

    R_ijkl = d_ik d_jl - d_il d_jk + J_ik J_jl - J_il J_jk + 2 J_ij J_kl,
    so sectional curvatures lie in [1, 4] and Ric = 2(m+1) g.
    """
    if not (1 <= m <= MAX_DIM // 2):
        raise DimensionOutOfRange(f"complex dimension {m} outside [1, {MAX_DIM // 2}]")
    n = 2 * m
    J = standard_complex_structure(m)
    R = (_identity_components(n)
         + np.einsum("ik,jl->ijkl", J, J) - np.einsum("il,jk->ijkl", J, J)
         + 2.0 * np.einsum("ij,kl->ijkl", J, J))
    return CurvatureTensor(R), J


def _block_J(*Js):
    n = sum(J.shape[0] for J in Js)
    out = np.zeros((n, n))
    o = 0
    for J in Js:
        k = J.shape[0]
        out[o:o + k, o:o + k] = J
        o += k
    return out


def kahler_models():
    """The four Kahler surfaces C^2, C x CP^1, CP^1 x CP^1 and CP^2.

    Each entry is ``(tensor, J)``; CP^1 carries its Fubini-Study metric
    (curvature 4), C its flat one.
    """
    cp1, j1 = fubini_study(1)
    cp2, j2 = fubini_study(2)
    flat2 = flat_factor(2)
    return {
        "C2": (product(flat2, flat2), _block_J(_J0, _J0)),
        "CxCP1": (product(flat2, cp1), _block_J(_J0, j1)),
        "CP1xCP1": (product(cp1, cp1), _block_J(j1, j1)),
        "CP2": (cp2, j2),
    }


def weakly_pic_models(n):
    """Model tensors in dimension n used by the random weakly-PIC sampler.

    Round sphere, all S^k x R^{n-k} products and the curved Kahler surfaces
    times a flat factor.  Every entry has a nonnegative curvature operator.
    """
    _check_dim(n)
    out = {"sphere": space_form(n)}
    for k in range(2, n):
        out[f"S{k}xR{n - k}"] = product(sphere_factor(k), flat_factor(n - k))
    for name, (T, _) in kahler_models().items():
        if name == "C2":
            continue
        out[name if n == 4 else f"{name}xR{n - 4}"] = (
            T if n == 4 else product(T, flat_factor(n - 4)))
    return out


# --- warped products --------------------------------------------------------

@dataclass(frozen=True)
class WarpedMetric:
    """Samples of ``g = ds^2 + phi(s)^2 g_{S^{n-1}}`` on a grid.

    ``f`` optionally holds the soliton potential.  With ``tip=True`` the
    first node is a smooth pole: phi(s0) = 0 and phi'(s0) = 1.
    """

    n: int
    s: np.ndarray
    phi: np.ndarray
    f: np.ndarray = None
    tip: bool = False

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "phi", phi)
        if self.f is not None:
            object.__setattr__(self, "f", np.asarray(self.f, dtype=float))
        _check_dim(self.n)
        if s.ndim != 1 or s.shape != phi.shape or s.size < 3:
            raise ValueError("s and phi must be 1-d arrays of equal length >= 3")
        if self.f is not None and self.f.shape != s.shape:
            raise ValueError("f must match the grid")
        if np.any(np.diff(s) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(phi[1:-1] <= 0):
            raise ValueError("phi must be positive at interior nodes")
        if self.tip:
            if abs(phi[0]) > 1e-8:
                raise ValueError(f"tip requires phi(s0) = 0, got {phi[0]:.3e}")
            slope = _derivatives(s, phi, 0, width=2)[0]  # one-sided
            if abs(slope - 1.0) > 1e-4:
                raise ValueError(f"tip requires phi'(s0) = 1, got {slope:.6g}")

    @property
    def nodes(self):
        return self.s.size


def fd_weights(x0, xs, m):
    """Finite-difference weights for derivatives 0..m at x0 on nodes xs.

    Fornberg's recursion; returns an array of shape (m + 1, len(xs)).
    """
    xs = np.asarray(xs, dtype=float)
    N = xs.size
    c = np.zeros((m + 1, N))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, N):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _stencil(s, y, i, width, odd, left, right):
    """Stencil around node i, reflected through poles at the grid ends.

    Returns None if the stencil leaves the grid at an end that is not a pole.
    """
    N = s.size
    sign = -1.0 if odd else 1.0
    xs, ys = [], []
    for j in range(i - width, i + width + 1):
        if j < 0:
            if not left or -j >= N:
                return None
            xs.append(2 * s[0] - s[-j])
            ys.append(sign * y[-j])
        elif j >= N:
            jj = 2 * (N - 1) - j
            if not right or jj < 0:
                return None
            xs.append(2 * s[-1] - s[jj])
            ys.append(sign * y[jj])
        else:
            xs.append(s[j])
            ys.append(y[j])
    return np.array(xs), np.array(ys)


def _derivatives(s, y, i, odd=False, width=3, left=False, right=False):
    """(y', y'') at node i; centered where possible, else one-sided."""
    st = _stencil(s, y, i, width, odd, left, right)
    if st is None:
        # shift the window inside the grid
        m = min(2 * width + 1, s.size)
        lo = min(max(i - width, 0), s.size - m)
        xs, ys = s[lo:lo + m], y[lo:lo + m]
    else:
        xs, ys = st
    w = fd_weights(s[i], xs, 2)
    return float(w[1] @ ys), float(w[2] @ ys)


def _poles(W):
    """Which grid ends are smooth poles (phi = 0 there)."""
    return bool(W.tip or abs(W.phi[0]) <= 1e-8), bool(abs(W.phi[-1]) <= 1e-8)


def _warped_tensor(n, k_rad, k_sph):
    """Pointwise tensor with e_0 radial: R_0j0j = k_rad, R_ijij = k_sph."""
    h = np.zeros((n, n))
    h[0, 0] = 1.0
    P = np.eye(n) - h
    return CurvatureTensor(k_rad * kulkarni_nomizu(h, P).components
                           + 0.5 * k_sph * kulkarni_nomizu(P, P).components)


def warped_curvature(W, index, width=3):
    """Sectional curvatures and pointwise tensor at an interior node.

    K_rad = -phi''/phi on radial planes, K_sph = (1 - phi'^2)/phi^2 on
    spherical planes.  Derivatives are (2*width+1)-point centered
    differences on the (possibly nonuniform) grid, reflected through any end
    where phi vanishes.  The reflection matters: near a pole K_sph is a 0/0
    quotient and a low-order phi' would spoil it.
    """
    i = int(index)
    if not (0 < i < W.nodes - 1):
        raise BoundaryNode(f"node {i} is not interior (grid has {W.nodes} nodes)")
    left, right = _poles(W)
    d1, d2 = _derivatives(W.s, W.phi, i, odd=True, width=width, left=left, right=right)
    p = W.phi[i]
    k_rad = -d2 / p
    k_sph = (1.0 - d1 * d1) / (p * p)
    return {"K_rad": k_rad, "K_sph": k_sph, "tensor": _warped_tensor(W.n, k_rad, k_sph)}


# --- Bryant soliton ---------------------------------------------------------

def _bryant_rhs(k):
    def rhs(s, y):
        phi, psi, h, _ = y
        dpsi = (k - 1) * (1.0 - psi * psi) / phi + psi * h
        return [psi, dpsi, k * dpsi / phi, h]
    return rhs


def bryant_soliton(n=4, s_max=50.0, nodes=2000, tip_scalar=1.0, rtol=1e-13, atol=1e-15):
    """Rotationally symmetric steady gradient soliton, Ric + Hess f = 0.

    With k = n - 1 and h = f' the reduced system is

        phi'' = (k-1)(1 - phi'^2)/phi + phi' h,   h' = k phi''/phi,

    started from the regular tip series phi = s + a s^3, h = 6ak s.  Every
    a < 0 gives the same soliton up to scaling, so a is fixed by the scalar
    curvature at the tip, R(0) = -6a n(n-1) = tip_scalar.  The grid is
    uniform on [0, s_max] with f(0) = 0.
    """
    if n < 4:
        raise DimensionOutOfRange("Bryant soliton needs n >= 4")
    _check_dim(n)
    if not s_max > 0 or not tip_scalar > 0:
        raise ValueError("s_max and tip_scalar must be positive")
    if nodes < 3:
        raise ValueError("need at least 3 nodes")
    k = n - 1
    a = -tip_scalar / (6.0 * n * (n - 1))
    s0 = min(1e-3 / np.sqrt(tip_scalar), s_max / (4 * nodes))
    y0 = [s0 + a * s0 ** 3, 1.0 + 3 * a * s0 ** 2, 6 * a * k * s0, 3 * a * k * s0 ** 2]

    def collapse(s, y):
        return y[0] - 1e-3 * s0
    collapse.terminal = True

    sol = solve_ivp(_bryant_rhs(k), (s0, s_max), y0, method="DOP853", rtol=rtol,
                    atol=atol, dense_output=True, events=collapse)
    if sol.status != 0 or sol.t[-1] < s_max:
        raise ShootingDivergence(f"integration stopped at s={sol.t[-1]:.6g}: {sol.message}")
    s = np.linspace(0.0, s_max, nodes)
    y = sol.sol(s[1:])
    if np.any(y[1] <= 0):
        raise ShootingDivergence("phi' crossed zero; the tip data do not give a complete soliton")
    phi = np.concatenate([[0.0], y[0]])
    f = np.concatenate([[0.0], y[3]])
    return WarpedMetric(n, s, phi, f, tip=True)


def soliton_residual(W, width=3):
    """Max |Ric + Hess f| per interior node, in curvature units.

    Derivatives use (2*width+1)-point finite differences, reflected through
    the tip (phi odd, f even).
    """
    if W.f is None:
        raise ValueError("metric carries no soliton potential")
    k = W.n - 1
    left, right = _poles(W)
    out = np.empty(W.nodes - 2)
    for i in range(1, W.nodes - 1):
        d1p, d2p = _derivatives(W.s, W.phi, i, odd=True, width=width, left=left, right=right)
        d1f, d2f = _derivatives(W.s, W.f, i, odd=False, width=width, left=left, right=right)
        p = W.phi[i]
        r_rad = -k * d2p / p + d2f
        r_sph = -d2p / p + (k - 1) * (1 - d1p * d1p) / (p * p) + d1p * d1f / p
        out[i - 1] = max(abs(r_rad), abs(r_sph))
    return out


def profile_curvatures(W):
    """(K_rad, K_sph, scalar) at all interior nodes."""
    kr = np.empty(W.nodes - 2)
    ks = np.empty(W.nodes - 2)
    for i in range(1, W.nodes - 1):
        c = warped_curvature(W, i)
        kr[i - 1], ks[i - 1] = c["K_rad"], c["K_sph"]
    k = W.n - 1
    return kr, ks, 2 * k * kr + k * (k - 1) * ks


# --- volumes ----------------------------------------------------------------

def sphere_area(m):
    """Area of the unit sphere S^m."""
    return 2.0 * pi ** ((m + 1) / 2) / gamma((m + 1) / 2)


def unit_ball_volume(n):
    return pi ** (n / 2) / gamma(n / 2 + 1)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _integrate(func, a, b, breaks):
    """Gauss-Legendre on each sub-interval of [a, b] cut at ``breaks``."""
    pts = np.concatenate([[a], breaks[(breaks > a) & (breaks < b)], [b]])
    lo, hi = pts[:-1], pts[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    return float(np.sum(half[:, None] * _GL_W[None, :] * func(x)))


def _cap_fraction(m, alpha):
    """int_0^alpha sin^m, for the area of a geodesic cap in S^{m+1}."""
    grid = np.linspace(0.0, pi, 4097)
    vals = np.sin(grid) ** m
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
    return np.interp(alpha, grid, cum)


def _endpoint_curve(spline, s_c, r, directions=2001, steps=800):
    """Endpoints (s, alpha) of geodesics of length r shot from (s_c, 0).

    Geodesics of the meridian surface ds^2 + phi^2 da^2 are integrated in
    arc length with RK4, using s' = cos g, a' = sin g / phi and
    g' = -phi' sin g / phi.  Since a increases along every geodesic, the
    edge of the ball at each level s lies on this curve.
    """
    dphi = spline.derivative()
    beta = np.linspace(0.0, pi, directions)
    y = np.stack([np.full_like(beta, s_c), np.zeros_like(beta), beta])

    def rhs(y):
        s, _, g = y
        p, dp = spline(s), dphi(s)
        return np.stack([np.cos(g), np.sin(g) / p, -dp * np.sin(g) / p])

    h = r / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[0], np.minimum(y[1], pi)


def _reach(curve_s, curve_a, levels):
    """max over polyline segments of the interpolated alpha at each level."""
    s0, s1 = curve_s[:-1], curve_s[1:]
    a0, a1 = curve_a[:-1], curve_a[1:]
    lo, hi = np.minimum(s0, s1), np.maximum(s0, s1)
    out = np.zeros(levels.size)
    for chunk in np.array_split(np.arange(levels.size), max(1, levels.size // 256)):
        L = levels[chunk][:, None]
        inside = (L >= lo) & (L <= hi)
        ds = np.where(s1 != s0, s1 - s0, 1.0)
        t = np.clip((L - s0) / ds, 0.0, 1.0)
        a = np.where(inside, a0 + t * (a1 - a0), 0.0)
        out[chunk] = a.max(axis=1)
    return out


def volume_ratio(W, center, r):
    """Vol B(x, r) / r^n for x on the axis at grid node ``center``.

    Balls centred at the tip are solid: the volume is
    omega_{n-1} int_0^r phi^{n-1} ds.  Off-tip balls are reconstructed by
    geodesic shooting in the meridian surface and must not contain the tip.
    The warp is interpolated by a cubic spline; radial integrals use
    Gauss-Legendre quadrature on each grid interval.
    """
    i = int(center)
    if not (0 <= i < W.nodes):
        raise ValueError(f"center node {i} outside grid")
    if not r > 0:
        raise ValueError("radius must be positive")
    s, phi = W.s, W.phi
    spline = CubicSpline(s, phi)
    m = W.n - 1
    s_c = s[i]
    if s_c + r > s[-1]:
        raise BallExceedsGrid(f"ball of radius {r} at s={s_c} exceeds grid end {s[-1]}")
    if W.tip and i == 0:
        vol = sphere_area(m) * _integrate(lambda x: spline(x) ** m, s[0], s[0] + r, s)
        return vol / r ** W.n
    if s_c - r < s[0] or (W.tip and s_c - r <= s[0]):
        raise BallExceedsGrid(f"ball of radius {r} at s={s_c} reaches the grid start "
                              f"{s[0]}; tip balls must be centred at the tip")
    levels = np.linspace(s_c - r, s_c + r, 4001)
    if np.any(spline(levels) <= 0):
        raise BallExceedsGrid("warp vanishes inside the ball")
    cs, ca = _endpoint_curve(spline, s_c, r)
    # cap of half-width alpha in S^m has area |S^{m-1}| int_0^alpha sin^{m-1}
    dens = spline(levels) ** m * sphere_area(m - 1) * _cap_fraction(m - 1, _reach(cs, ca, levels))
    vol = float(np.sum(0.5 * (dens[1:] + dens[:-1])) * (levels[1] - levels[0]))
    return vol / r ** W.n


def curvature_norms(W):
    """|Rm| at every interior node (nan at the ends)."""
    out = np.full(W.nodes, np.nan)
    for i in range(1, W.nodes - 1):
        out[i] = warped_curvature(W, i)["tensor"].norm()
    return out


def kappa_check(W, r_list, centers=None):
    """Infimum of Vol B(x, r)/r^n over balls satisfying |Rm| <= r^-2.

    ``centers`` are node indices (default: the tip, or the middle node).
    Pairs whose ball leaves the grid, or reaches the tip from off-centre,
    are recorded as skipped; pairs failing the curvature premise are not
    evaluated.
    """
    if centers is None:
        centers = [0] if W.tip else [W.nodes // 2]
    norms = curvature_norms(W)
    if W.tip:
        norms[0] = norms[1]
    rows = []
    for c in centers:
        for r in r_list:
            row = {"center": int(c), "s": float(W.s[c]), "r": float(r)}
            lo, hi = W.s[c] - r, W.s[c] + r
            sel = (W.s >= max(lo, W.s[0])) & (W.s <= hi) & np.isfinite(norms)
            premise = bool(sel.any() and norms[sel].max() <= r ** -2)
            row["premise"] = premise
            if not premise:
                rows.append(row)
                continue
            try:
                row["ratio"] = volume_ratio(W, c, r)
            except BallExceedsGrid as exc:
                row["skipped"] = str(exc)
            rows.append(row)
    ratios = [row["ratio"] for row in rows if "ratio" in row]
    return {
        "infimum": float(min(ratios)) if ratios else None,
        "evaluated": len(ratios),
        "rows": rows,
    }
