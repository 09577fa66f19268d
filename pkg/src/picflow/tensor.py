"""Algebraic curvature tensors on R^n.

Components are stored densely as an ``(n, n, n, n)`` array with the sign
convention ``R_ijij > 0`` on the round sphere, i.e. the identity tensor is
``I_ijkl = d_ik d_jl - d_il d_jk``.  Symmetric bilinear forms (Ricci tensor,
metric) are plain symmetric ``(n, n)`` arrays.
"""

import numpy as np

from .errors import (DimensionMismatch, DimensionOutOfRange, SingularTransform,
                     SymmetryViolation)

MIN_DIM = 4
MAX_DIM = 12

# absolute tolerances, scaled by the largest entry once it exceeds 1
PAIR_TOL = 1e-12
BIANCHI_TOL = 1e-10


class CurvatureTensor:
    """Immutable algebraic curvature tensor.

    Use :func:`make_tensor` for validated construction.  Arithmetic
    (``+``, ``-``, scalar ``*`` and ``/``) returns new tensors without
    re-validating, since linear combinations preserve every symmetry.
    """

    __slots__ = ("_R",)

    def __init__(self, components):
        R = np.array(components, dtype=float)
        R.setflags(write=False)
        self._R = R

    @property
    def components(self):
        return self._R

    @property
    def n(self):
        return self._R.shape[0]

    def __repr__(self):
        return f"CurvatureTensor(n={self.n}, |Rm|={self.norm():.6g})"

    def __add__(self, other):
        if not isinstance(other, CurvatureTensor):
            return NotImplemented
        _same_dim(self, other)
        return CurvatureTensor(self._R + other._R)

    def __sub__(self, other):
        if not isinstance(other, CurvatureTensor):
            return NotImplemented
        _same_dim(self, other)
        return CurvatureTensor(self._R - other._R)

    def __neg__(self):
        return CurvatureTensor(-self._R)

    def __mul__(self, scalar):
        if isinstance(scalar, CurvatureTensor):
            return NotImplemented
        return CurvatureTensor(float(scalar) * self._R)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return CurvatureTensor(self._R / float(scalar))

    def norm(self):
        return frobenius_norm(self)

    def ricci(self):
        return ricci(self)

    def scalar(self):
        return scalar(self)

    def rotate(self, O):
        return rotate(self, O)

    def matrix(self):
        """Components as an ``(n*n, n*n)`` matrix indexed by ``(ij), (kl)``."""
        n = self.n
        return self._R.reshape(n * n, n * n)


def _same_dim(a, b):
    if a.n != b.n:
        raise DimensionMismatch(f"dimensions differ: {a.n} vs {b.n}")


def _check_dim(n, lo=MIN_DIM):
    if not (lo <= n <= MAX_DIM):
        raise DimensionOutOfRange(f"n={n} outside [{lo}, {MAX_DIM}]")


def symmetry_residuals(R):
    """Max residuals of (antisymmetry, pair symmetry, first Bianchi)."""
    R = np.asarray(R)
    anti = max(np.abs(R + R.transpose(1, 0, 2, 3)).max(),
               np.abs(R + R.transpose(0, 1, 3, 2)).max())
    pair = np.abs(R - R.transpose(2, 3, 0, 1)).max()
    # R_ijkl + R_iklj + R_iljk
    bianchi = np.abs(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)).max()
    return float(anti), float(pair), float(bianchi)


def validate(R):
    """Raise :class:`SymmetryViolation` if ``R`` is not a curvature tensor."""
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise SymmetryViolation("finiteness", np.inf)
    scale = max(1.0, float(np.abs(R).max()) if R.size else 1.0)
    anti, pair, bianchi = symmetry_residuals(R)
    if anti > PAIR_TOL * scale:
        raise SymmetryViolation("antisymmetry", anti)
    if pair > PAIR_TOL * scale:
        raise SymmetryViolation("pair symmetry", pair)
    if bianchi > BIANCHI_TOL * scale:
        raise SymmetryViolation("first Bianchi", bianchi)


def make_tensor(n, components):
    """Validated constructor; never symmetrizes silently."""
    _check_dim(n)
    R = np.asarray(components, dtype=float)
    if R.size != n ** 4:
        raise DimensionMismatch(f"expected {n ** 4} components, got {R.size}")
    R = R.reshape(n, n, n, n)
    validate(R)
    return CurvatureTensor(R)


def zero_tensor(n):
    _check_dim(n)
    return CurvatureTensor(np.zeros((n, n, n, n)))


def kulkarni_nomizu(h, k):
    """(h o k)_ijkl = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if h.shape != k.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"incompatible bilinear forms {h.shape}, {k.shape}")
    out = (np.einsum("ik,jl->ijkl", h, k) + np.einsum("jl,ik->ijkl", h, k)
           - np.einsum("il,jk->ijkl", h, k) - np.einsum("jk,il->ijkl", h, k))
    return CurvatureTensor(out)


def _identity_components(n):
    d = np.eye(n)
    return np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d)


def identity_tensor(n):
    """The curvature tensor of the unit sphere, I = 1/2 id o id."""
    _check_dim(n)
    return CurvatureTensor(_identity_components(n))


def ricci(Rm):
    """Ric_jl = sum_i R_ijil."""
    return np.einsum("ijil->jl", Rm.components)


def scalar(Rm):
    return float(np.trace(ricci(Rm)))


def frobenius_norm(Rm):
    return float(np.sqrt(np.sum(Rm.components ** 2)))


def rotate(Rm, O):
    """Frame change on all four indices, (O.R)_ijkl = O_ia O_jb O_kc O_ld R_abcd."""
    O = np.asarray(O, dtype=float)
    R = Rm.components
    out = np.einsum("ia,abcd->ibcd", O, R)
    out = np.einsum("jb,ibcd->ijcd", O, out)
    out = np.einsum("kc,ijcd->ijkd", O, out)
    out = np.einsum("ld,ijkd->ijkl", O, out)
    return CurvatureTensor(out)


def q_components(R):
    """Raw-array form of :func:`q_reaction`.

    R_ijpq R_klpq + 2 R_ipkq R_jplq - 2 R_iplq R_jpkq, with every sum over
    (p, q) done as one matrix product.
    """
    n = R.shape[0]
    M = R.reshape(n * n, n * n)
    out = (M @ M.T).reshape(n, n, n, n)
    M2 = R.transpose(0, 2, 1, 3).reshape(n * n, n * n)
    P = (M2 @ M2.T).reshape(n, n, n, n)  # P[i,k,j,l] = sum_pq R_ipkq R_jplq
    out += 2.0 * P.transpose(0, 2, 1, 3)
    out -= 2.0 * P.transpose(0, 2, 3, 1)
    return out


def q_reaction(Rm):
    """Reaction term of the curvature evolution, dRm/dt = Q(Rm)."""
    return CurvatureTensor(q_components(Rm.components))


def q_identity_constant(n):
    """c_n with Q(I) = c_n I, read off the (0,1,0,1) component of the formula."""
    return float(q_components(_identity_components(n))[0, 1, 0, 1])


def l_ab_transform(S, a, b):
    """S + b Ric(S) o id + (2(a-b)/n) scal(S) I."""
    n = S.n
    g = np.eye(n)
    ric = ricci(S)
    out = (S.components + b * kulkarni_nomizu(ric, g).components
           + (2.0 * (a - b) / n) * np.trace(ric) * _identity_components(n))
    return CurvatureTensor(out)


def l_ab_invert(Rm, a, b):
    """Solve l_ab_transform(S, a, b) = Rm for S.

    The transform acts on (Ric, scal) by
    ``Ric -> (1 + b(n-2)) Ric + (b + 2(a-b)(n-1)/n) scal id`` and
    ``scal -> (1 + 2a(n-1)) scal``, so S is recovered by inverting these two
    scalar factors.
    """
    n = Rm.n
    f_ric = 1.0 + b * (n - 2)
    f_scal = 1.0 + 2.0 * a * (n - 1)
    if abs(f_ric) < 1e-12 or abs(f_scal) < 1e-12:
        raise SingularTransform(a, b)
    g = np.eye(n)
    ric_rm = ricci(Rm)
    s = np.trace(ric_rm) / f_scal
    ric_s = (ric_rm - (b + 2.0 * (a - b) * (n - 1) / n) * s * g) / f_ric
    out = (Rm.components - b * kulkarni_nomizu(ric_s, g).components
           - (2.0 * (a - b) / n) * s * _identity_components(n))
    return CurvatureTensor(out)


def project_curvature(X):
    """Project an arbitrary 4-tensor onto algebraic curvature tensors.

    Averages over the 8-element group generated by the two antisymmetries
    and the pair swap, then removes one third of the cyclic sum, which for a
    pair-symmetric tensor is its totally antisymmetric part.
    """
    X = np.asarray(X, dtype=float)
    X = X - X.transpose(1, 0, 2, 3)
    X = X - X.transpose(0, 1, 3, 2)
    X = X + X.transpose(2, 3, 0, 1)
    X = X / 8.0
    cyc = (X + X.transpose(0, 2, 3, 1) + X.transpose(0, 3, 1, 2)) / 3.0
    return X - cyc


def random_tensor(n, rng, scale=1.0):
    """Gaussian random curvature tensor via :func:`project_curvature`."""
    _check_dim(n)
    return CurvatureTensor(scale * project_curvature(rng.standard_normal((n,) * 4)))


def random_rotation(n, rng, proper=True):
    """Haar-distributed orthogonal matrix (QR of a Gaussian, sign-fixed)."""
    Z = rng.standard_normal((n, n))
    Qm, Rr = np.linalg.qr(Z)
    Qm = Qm * np.sign(np.diag(Rr))
    if proper and np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm
