import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picflow.errors import (DimensionMismatch, DimensionOutOfRange, SingularTransform,
                            SymmetryViolation)
from picflow.tensor import (CurvatureTensor, frobenius_norm, identity_tensor, kulkarni_nomizu,
                            l_ab_invert, l_ab_transform, make_tensor, project_curvature,
                            q_identity_constant, q_reaction, random_rotation, random_tensor,
                            ricci, rotate, scalar, symmetry_residuals, zero_tensor)


def q_oracle(R):
    # the index formula written out term by term
    return (np.einsum("ijpq,klpq->ijkl", R, R)
            + 2 * np.einsum("ipkq,jplq->ijkl", R, R)
            - 2 * np.einsum("iplq,jpkq->ijkl", R, R))


def assert_curvature(Rm, tol=1e-10):
    anti, pair, bianchi = symmetry_residuals(Rm.components)
    scale = max(1.0, np.abs(Rm.components).max())
    assert anti <= 1e-12 * scale and pair <= 1e-12 * scale
    assert bianchi <= tol * scale


rng_seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def test_make_tensor_space_form():
    n = 4
    d = np.eye(n)
    comps = np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d)
    Rm = make_tensor(n, comps.ravel())
    assert Rm.components[0, 1, 0, 1] == 1.0


def test_make_tensor_rejects_antisymmetry():
    R = np.zeros((4,) * 4)
    R[0, 1, 0, 1] = 1.0
    R[1, 0, 0, 1] = 1.0
    with pytest.raises(SymmetryViolation) as exc:
        make_tensor(4, R)
    assert exc.value.identity == "antisymmetry"


def test_make_tensor_rejects_bianchi():
    # totally antisymmetric part violates the first Bianchi identity
    R = np.zeros((4,) * 4)
    from itertools import permutations
    for p in permutations(range(4)):
        sign = np.linalg.det(np.eye(4)[list(p)])
        R[p] = sign
    with pytest.raises(SymmetryViolation, match="Bianchi"):
        make_tensor(4, R)


def test_make_tensor_does_not_symmetrize():
    R = random_tensor(5, np.random.default_rng(0)).components.copy()
    R[0, 1, 2, 3] += 1e-6
    with pytest.raises(SymmetryViolation):
        make_tensor(5, R)


@pytest.mark.parametrize("n", [3, 13])
def test_dimension_range(n):
    with pytest.raises(DimensionOutOfRange):
        identity_tensor(n)
    with pytest.raises(DimensionOutOfRange):
        make_tensor(n, np.zeros(n ** 4))


def test_random_tensor_valid():
    Rm = random_tensor(5, np.random.default_rng(1))
    make_tensor(5, Rm.components)


@given(rng_seeds)
@settings(max_examples=25, deadline=None)
def test_projection_is_idempotent(seed):
    X = np.random.default_rng(seed).standard_normal((4,) * 4)
    P = project_curvature(X)
    assert np.allclose(project_curvature(P), P, atol=1e-13)
    assert_curvature(CurvatureTensor(P), tol=1e-13)


def test_identity_components():
    I = identity_tensor(4).components
    assert I[0, 1, 0, 1] == 1 and I[0, 1, 1, 0] == -1 and I[0, 1, 2, 3] == 0
    assert scalar(identity_tensor(4)) == 12
    assert np.array_equal(ricci(identity_tensor(12)), 11 * np.eye(12))
    # nonzero entries are I_ijij = 1 and I_ijji = -1 over the 12 ordered pairs i != j
    count = sum(1 for i in range(4) for j in range(4) for k in range(4) for l in range(4)
                if I[i, j, k, l] != 0)
    assert count == 24
    assert frobenius_norm(identity_tensor(4)) == pytest.approx(np.sqrt(24), rel=1e-15)


@pytest.mark.parametrize("n", [4, 7, 12])
def test_half_id_wedge_id_is_identity(n):
    g = np.eye(n)
    assert np.array_equal((0.5 * kulkarni_nomizu(g, g)).components, identity_tensor(n).components)


def test_cylinder_from_kulkarni_nomizu():
    P = np.diag([1.0, 1, 1, 0])
    cyl = 0.5 * kulkarni_nomizu(P, P)
    assert cyl.components[0, 1, 0, 1] == 1 and cyl.components[0, 3, 0, 3] == 0
    # direct contraction
    ric = np.array([[sum(cyl.components[i, j, i, l] for i in range(4)) for l in range(4)]
                    for j in range(4)])
    assert np.array_equal(ricci(cyl), ric)
    assert np.allclose(ric, np.diag([2, 2, 2, 0]))
    assert scalar(cyl) == 6


def test_kulkarni_nomizu_mismatch():
    with pytest.raises(DimensionMismatch):
        kulkarni_nomizu(np.eye(4), np.eye(5))


@given(rng_seeds)
@settings(max_examples=25, deadline=None)
def test_kulkarni_nomizu_random_symmetric(seed):
    rng = np.random.default_rng(seed)
    h, k = rng.standard_normal((2, 5, 5))
    h, k = h + h.T, k + k.T
    assert_curvature(kulkarni_nomizu(h, k), tol=1e-12)


def test_zero_tensor_contractions():
    z = zero_tensor(6)
    assert not ricci(z).any() and scalar(z) == 0


@pytest.mark.parametrize("n", [4, 5])
def test_q_matches_index_formula(n):
    Rm = random_tensor(n, np.random.default_rng(n))
    assert np.allclose(q_reaction(Rm).components, q_oracle(Rm.components), atol=1e-12)


def test_q_zero_and_identity():
    assert not q_reaction(zero_tensor(4)).components.any()
    c4 = q_identity_constant(4)
    assert c4 == pytest.approx(6.0, abs=1e-14)
    assert np.allclose(q_reaction(identity_tensor(4)).components,
                       c4 * identity_tensor(4).components, atol=1e-14)
    for n in (5, 8):
        assert q_identity_constant(n) == pytest.approx(2 * (n - 1), abs=1e-12)


def test_q_output_is_curvature_tensor():
    Rm = random_tensor(6, np.random.default_rng(2))
    Q = q_reaction(Rm)
    scale = np.abs(Q.components).max()
    assert symmetry_residuals(Q.components)[2] <= 1e-9 * scale


@given(rng_seeds, st.floats(min_value=-10, max_value=10, allow_nan=False))
@settings(max_examples=30, deadline=None)
def test_q_is_quadratic(seed, rho):
    Rm = random_tensor(4, np.random.default_rng(seed))
    Q1 = q_reaction(rho * Rm).components
    Q2 = rho ** 2 * q_reaction(Rm).components
    assert np.abs(Q1 - Q2).max() <= 1e-12 * max(np.abs(Q2).max(), 1e-300) + 1e-300


@pytest.mark.parametrize("n", [4, 5])
def test_q_equivariance(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(20):
        Rm = random_tensor(n, rng)
        O = random_rotation(n, rng, proper=False)
        lhs = q_reaction(rotate(Rm, O)).components
        rhs = rotate(q_reaction(Rm), O).components
        assert np.abs(lhs - rhs).max() <= 1e-10


@given(rng_seeds, st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_ricci_scalar_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    A, B = random_tensor(4, rng), random_tensor(4, rng)
    lhs = ricci(alpha * A + beta * B)
    rhs = alpha * ricci(A) + beta * ricci(B)
    assert np.abs(lhs - rhs).max() <= 1e-14 * max(1, np.abs(rhs).max()) * 10
    assert scalar(alpha * A + beta * B) == pytest.approx(alpha * scalar(A) + beta * scalar(B),
                                                         abs=1e-12)


def test_norm_arithmetic():
    Rm = random_tensor(5, np.random.default_rng(3))
    assert frobenius_norm(2 * Rm) == pytest.approx(2 * frobenius_norm(Rm), rel=1e-15)
    assert frobenius_norm(Rm + (-1) * Rm) == 0


def test_l_ab_identity_when_zero():
    Rm = random_tensor(5, np.random.default_rng(4))
    assert np.array_equal(l_ab_transform(Rm, 0.0, 0.0).components, Rm.components)


def test_l_ab_fixes_weyl_tensors():
    # Weyl part of a random tensor: subtract the Ricci and scalar pieces
    rng = np.random.default_rng(5)
    n = 6
    Rm = random_tensor(n, rng)
    g = np.eye(n)
    ric = ricci(Rm)
    s = np.trace(ric)
    E = ric - s / n * g
    W = (Rm.components - kulkarni_nomizu(E, g).components / (n - 2)
         - s / (n * (n - 1)) * identity_tensor(n).components)
    W = CurvatureTensor(W)
    assert np.abs(ricci(W)).max() < 1e-12
    out = l_ab_transform(W, 0.7, -0.3)
    assert np.allclose(out.components, W.components, atol=1e-12)


def test_l_ab_round_trip_n12():
    Rm = random_tensor(12, np.random.default_rng(6))
    S = l_ab_invert(Rm, 0.3, 0.1)
    back = l_ab_transform(S, 0.3, 0.1)
    rel = np.abs(back.components - Rm.components).max() / np.abs(Rm.components).max()
    assert rel <= 1e-10


@given(rng_seeds, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
@settings(max_examples=30, deadline=None)
def test_l_ab_round_trip_property(seed, a, b):
    n = 5
    if abs(1 + b * (n - 2)) < 0.05 or abs(1 + 2 * a * (n - 1)) < 0.05:
        return
    Rm = random_tensor(n, np.random.default_rng(seed))
    back = l_ab_invert(l_ab_transform(Rm, a, b), a, b)
    assert np.abs(back.components - Rm.components).max() <= 1e-10 * np.abs(Rm.components).max()


def test_l_ab_singular():
    n = 5
    with pytest.raises(SingularTransform):
        l_ab_invert(identity_tensor(n), 0.0, -1.0 / (n - 2))
    with pytest.raises(SingularTransform):
        l_ab_invert(identity_tensor(n), -1.0 / (2 * (n - 1)), 0.0)


def test_tensor_is_immutable():
    Rm = identity_tensor(4)
    with pytest.raises(ValueError):
        Rm.components[0, 1, 0, 1] = 3.0
