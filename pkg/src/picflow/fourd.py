"""Self-dual / anti-self-dual block structure of 4D curvature operators.

Bivectors are represented as antisymmetric ``(n, n)`` matrices with inner
product ``<w, v> = 1/2 sum_ij w_ij v_ij``, so ``e_i ^ e_j`` has unit norm.
The curvature operator acts by ``Op(w, v) = 1/2 sum w_ij R_ijkl v_kl``;
on a coordinate plane this is ``Op(e_i^e_j, e_i^e_j) = 2 R_ijij``.

That factor 2 (:data:`OPERATOR_SCALE`) is the calibration: on the unit
sphere every eigenvalue is 2, so ``tr A = 6 = R/2``, and in general
``tr A = tr C = R/2``.  With it, ``Op(Q(Rm)) = Op^2 + Op(Rm#)`` holds as a
plain matrix identity.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DimensionNot4, NotKahler
from .tensor import CurvatureTensor, frobenius_norm, q_components, rotate, scalar

OPERATOR_SCALE = 2.0

RATIO_TOL = 1e-12
PSD_TOL = 1e-9
KAHLER_TOL = 1e-6

_SQ2 = np.sqrt(2.0)
# (pair, dual pair) with *(e_a^e_b) = e_c^e_d for orientation e_1234
_PAIRING = (((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2)))


def _unit_bivector(n, i, j):
    w = np.zeros((n, n))
    w[i, j], w[j, i] = 1.0, -1.0
    return w


def hodge_star(w):
    """Hodge star of a bivector on oriented R^4."""
    w = np.asarray(w)
    if w.shape != (4, 4):
        raise DimensionNot4("Hodge star is defined here for n = 4 only")
    out = np.zeros((4, 4))
    for (a, b), (c, d) in _PAIRING:
        out[c, d] += w[a, b]
        out[a, b] += w[c, d]
    return out - out.T


def bivector_inner(w, v):
    return 0.5 * float(np.sum(np.asarray(w) * np.asarray(v)))


def lambda_pm_basis():
    """Orthonormal bases (phi_1^+, phi_2^+, phi_3^+, phi_1^-, phi_2^-, phi_3^-).

    ``phi_i^+- = (e_a^e_b +- e_c^e_d)/sqrt(2)`` over the pairings
    (12|34), (13|42), (14|23).  Returned as a ``(6, 4, 4)`` array.
    """
    plus, minus = [], []
    for (a, b), (c, d) in _PAIRING:
        u, v = _unit_bivector(4, a, b), _unit_bivector(4, c, d)
        plus.append((u + v) / _SQ2)
        minus.append((u - v) / _SQ2)
    return np.array(plus + minus)


def operator_in_basis(Rm, basis):
    """Matrix ``Op(phi_a, phi_b)`` of the curvature operator on a bivector basis."""
    R = Rm.components if isinstance(Rm, CurvatureTensor) else np.asarray(Rm)
    return 0.5 * np.einsum("aij,ijkl,bkl->ab", basis, R, basis)


def _pair_index(n):
    return list(combinations(range(n), 2))


def curvature_operator(Rm):
    """Curvature operator on the coordinate basis ``e_i^e_j``, i < j."""
    n = Rm.n
    idx = np.array(_pair_index(n))
    R = Rm.components
    return OPERATOR_SCALE * R[idx[:, 0][:, None], idx[:, 1][:, None],
                              idx[:, 0][None, :], idx[:, 1][None, :]]


def _sorted_singular_values(B):
    ev = np.linalg.eigvalsh(B.T @ B)
    return np.sqrt(np.clip(ev, 0.0, None))


@dataclass(frozen=True)
class BlockDecomp:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    scalar: float
    norm: float

    @property
    def traces(self):
        return float(np.trace(self.A)), float(np.trace(self.C))

    def pic_margin(self):
        """min(a1 + a2, c1 + c2): nonnegative iff weakly PIC."""
        return float(min(self.a[0] + self.a[1], self.c[0] + self.c[1]))

    def to_dict(self):
        rep = pinching_from_blocks(self)
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "traces": {"A": self.traces[0], "C": self.traces[1], "half_scalar": self.scalar / 2},
            "ratios": {k: _json_ratio(rep[k]) for k in ("lemma41_a", "lemma41_c", "lemma42", "lemma43")},
            "flags": rep["flags"],
        }


def _json_ratio(x):
    return "inf" if np.isinf(x) else float(x)


def block_decomp(Rm, frame=None):
    """Blocks A, B, C of the curvature operator in the Lambda^+- basis.

    ``frame`` (rows = orthonormal basis of R^4) changes the reference frame
    before decomposing; by default the coordinate frame is used.
    """
    if Rm.n != 4:
        raise DimensionNot4(f"block decomposition needs n = 4, got n = {Rm.n}")
    if frame is not None:
        Rm = rotate(Rm, frame)
    M = operator_in_basis(Rm, lambda_pm_basis())
    M = 0.5 * (M + M.T)
    A, B, C = M[:3, :3], M[:3, 3:], M[3:, 3:]
    return BlockDecomp(A=A, B=B, C=C,
                       a=np.linalg.eigvalsh(A), b=_sorted_singular_values(B),
                       c=np.linalg.eigvalsh(C),
                       scalar=scalar(Rm), norm=frobenius_norm(Rm))


def _ratio(num, den, scale):
    if den <= RATIO_TOL * scale:
        return np.inf
    return float(num / den)


def restricted_pinching_margins(bd, K):
    """Margins of a3 <= K a1, c3 <= K c1, b3^2 <= a1 c1 (>= 0 means satisfied)."""
    a, b, c = bd.a, bd.b, bd.c
    return (float(K * a[0] - a[2]), float(K * c[0] - c[2]), float(a[0] * c[0] - b[2] ** 2))


def uniform_pic_ratio(bd):
    """max(a3, b3, c3) / min(a1 + a2, c1 + c2), or inf if the minimum vanishes."""
    den = bd.pic_margin()
    num = max(bd.a[2], bd.b[2], bd.c[2])
    return _ratio(num, den, max(bd.norm, 1e-300))


def pinching_from_blocks(bd):
    a, b, c = bd.a, bd.b, bd.c
    scale = max(bd.norm, 1e-300)
    out = {
        "lemma41_a": _ratio(a[2], a[0], scale),
        "lemma41_c": _ratio(c[2], c[0], scale),
        "lemma42": _ratio(b[2] ** 2, (a[0] + a[1]) * (c[0] + c[1]), scale ** 2)
        if min(a[0] + a[1], c[0] + c[1]) > RATIO_TOL * scale else np.inf,
        "lemma43": _ratio(b[2] ** 2, a[0] * c[0], scale ** 2)
        if min(a[0], c[0]) > RATIO_TOL * scale else np.inf,
    }
    lam = uniform_pic_ratio(bd)
    if np.isinf(lam) or bd.pic_margin() <= 0:
        out["K"] = np.inf
        out["restricted_ok"] = False
    else:
        K = 6.0 * max(lam, 1.0) ** 2 + 1.0
        tol = RATIO_TOL * scale
        out["K"] = K
        out["restricted_ok"] = all(m >= -tol * max(1.0, K) for m in restricted_pinching_margins(bd, K))
    out["flags"] = sorted(k for k in ("lemma41_a", "lemma41_c", "lemma42", "lemma43") if np.isinf(out[k]))
    return out


def pinching_report(Rm):
    """Pinching ratios of the 4D curvature-improvement lemmas.

    Vanishing denominators give ``inf`` and are listed under ``flags``.
    ``restricted_ok`` tests ``a3 <= K a1, c3 <= K c1, b3^2 <= a1 c1`` with
    ``K = 6 L^2 + 1`` where ``L = max(1, uniform PIC ratio)``.
    """
    return pinching_from_blocks(block_decomp(Rm))


def psd_curvature_operator(Rm):
    ev = np.linalg.eigvalsh(curvature_operator(Rm))
    m = float(ev[0])
    return {"min_eigenvalue": m, "psd": m >= -PSD_TOL * frobenius_norm(Rm)}


@dataclass(frozen=True)
class KahlerForm:
    scalar_half: float
    rho: np.ndarray
    C: np.ndarray
    residual: float
    frame: np.ndarray
    operator: np.ndarray = field(repr=False)

    @property
    def c(self):
        return np.linalg.eigvalsh(self.C)


def _check_complex_structure(J):
    J = np.asarray(J, dtype=float)
    if J.shape != (4, 4):
        raise DimensionNot4("complex structure must be 4x4")
    if (np.abs(J @ J + np.eye(4)).max() > 1e-10
            or np.abs(J.T @ J - np.eye(4)).max() > 1e-10):
        raise ValueError("J must be orthogonal with J^2 = -id")
    return J


def adapted_frame(J):
    """Orthonormal frame (e1, J e1, e2, J e2) for a complex structure J."""
    J = _check_complex_structure(J)
    f1 = np.eye(4)[0]
    f2 = J @ f1
    P = np.eye(4) - np.outer(f1, f1) - np.outer(f2, f2)
    k = int(np.argmax(np.linalg.norm(P, axis=0)))
    f3 = P[:, k] / np.linalg.norm(P[:, k])
    f4 = J @ f3
    return np.array([f1, f2, f3, f4])


def kahler_block_form(Rm, J, tol=KAHLER_TOL):
    """6x6 operator of a Kahler curvature tensor in the J-adapted basis.

    The rows of phi_2^+ and phi_3^+ must vanish; ``residual`` is their
    largest entry.  Raises :class:`NotKahler` above ``tol * |Rm|``.
    """
    if Rm.n != 4:
        raise DimensionNot4(f"Kahler block form needs n = 4, got n = {Rm.n}")
    F = adapted_frame(J)
    M = operator_in_basis(rotate(Rm, F), lambda_pm_basis())
    M = 0.5 * (M + M.T)
    residual = float(np.abs(M[1:3, :]).max())
    if residual > tol * frobenius_norm(Rm):
        raise NotKahler(residual, tol * frobenius_norm(Rm))
    return KahlerForm(scalar_half=float(M[0, 0]), rho=M[0, 3:].copy(), C=M[3:, 3:].copy(),
                      residual=residual, frame=F, operator=M)


def square_components(R):
    """Index form of the operator square, (Rm^2)_ijkl = R_ijpq R_pqkl."""
    n = R.shape[0]
    M = R.reshape(n * n, n * n)
    return (M @ M).reshape(n, n, n, n)


def sharp_operator(Rm):
    """Rm# = Q(Rm) - Rm^2."""
    R = Rm.components
    return CurvatureTensor(q_components(R) - square_components(R))


def structure_constants(basis):
    """c_abg = <[phi_a, phi_b], phi_g> for an orthonormal bivector basis."""
    comm = np.einsum("aij,bjk->abik", basis, basis)
    comm = comm - comm.transpose(1, 0, 2, 3)
    return 0.5 * np.einsum("abik,gik->abg", comm, basis)


def sharp_lie(Rm, basis=None):
    """Rm# from the Lie algebra structure of so(n), as a second route.

    In an orthonormal bivector basis with structure constants c,
    ``Op(Rm#)_ab = 1/2 sum c_agd c_bez Op_ge Op_dz``.  Defaults to the
    Lambda^+- basis for n = 4 and to ``e_i^e_j`` otherwise.
    """
    n = Rm.n
    if basis is None:
        if n == 4:
            basis = lambda_pm_basis()
        else:
            basis = np.array([_unit_bivector(n, i, j) for i, j in _pair_index(n)])
    c = structure_constants(basis)
    M = operator_in_basis(Rm, basis)
    # T[b, g, d] = sum_ez c_bez M_ge M_dz
    T = np.einsum("ge,bez,dz->bgd", M, c, M, optimize=True)
    sharp = 0.5 * np.einsum("agd,bgd->ab", c, T)
    # back to index form: R#_ijkl = 1/2 sum_ab phi_a,ij Op#_ab phi_b,kl
    comps = 0.5 * np.einsum("aij,ab,bkl->ijkl", basis, sharp, basis)
    return CurvatureTensor(comps)


def adjugate3(X):
    """Cofactor matrix of a 3x3 matrix, (X#)_ij = 1/2 e_ikl e_jmn X_km X_ln."""
    X = np.asarray(X)
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return 0.5 * np.einsum("ikl,jmn,km,ln->ij", eps, eps, X, X)
