"""Acceptance criteria at desk scale, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Reports are built from per-sample rows keyed by seed and index, so the
determinism check can rerun a prefix of each experiment and compare bytes.
"""

import time

import numpy as np
import pytest

import conftest
from conftest import brute_min, refined_min, tensor_from_blocks
from picflow import cones, fourd, io
from picflow.isotropic import isotropic_value, min_isotropic, uniform_pic_theta
from picflow.models import (bryant_soliton, cylinder, kahler_models, kappa_check,
                            profile_curvatures, shrinking_cylinder, soliton_residual,
                            warped_curvature)
from picflow.tensor import (frobenius_norm, identity_tensor, q_identity_constant, q_reaction,
                            random_tensor, rotate, scalar)

SEED = 20240601
DEAD_ZONE = 1e-6


def record(k, passed, detail, seconds):
    line = f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}  ({seconds:.1f} s)"
    print(line)
    conftest.ACCEPTANCE[k] = line


def child_rng(*key):
    return np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=key))


# --- report builders (shared with the determinism check) --------------------

def oracle_rows(n, count):
    rows = []
    for i in range(count):
        X = random_tensor(n, child_rng(1, n, i))
        rep = min_isotropic(X, "PIC", seed=i)
        again = isotropic_value(X, rep.frame, rep.lam, rep.mu)
        rows.append({"n": n, "index": i, "norm": frobenius_norm(X), "minimum": rep.minimum,
                     "brute": brute_min(X, "PIC", count=50000, seed=i),
                     "reeval_error": abs(again - rep.minimum)})
    return rows


def invariance_report(name, n, samples):
    rep = cones.invariance_experiment(name, n, samples, seed=SEED + n)
    return rep


def pinching_rows(count):
    rows = []
    for i, X in enumerate(cones.pinched_samples(count, SEED)):
        out = cones.pinching_trajectories(X)
        worst_restricted = min(min(r["restricted"]) / r["norm"] for r in out["rows"])
        worst_42 = max(r["lemma42"] for r in out["rows"])
        rows.append({"index": i, "K": out["K"], "t_end": out["t_end"], "reason": out["reason"],
                     "lemma42_start": out["rows"][0]["lemma42"],
                     "worst_restricted": worst_restricted, "worst_lemma42": worst_42})
    return rows


@pytest.fixture(scope="module")
def reports():
    return {}


# --- criteria ---------------------------------------------------------------

def test_c01_oracle_equivalence(reports):
    t0 = time.perf_counter()
    rows = [r for n in (4, 5, 6) for r in oracle_rows(n, 100)]
    reports[1] = rows
    bad_min = [r for r in rows if r["minimum"] > r["brute"] + 1e-3 * r["norm"]]
    bad_eval = [r for r in rows if r["reeval_error"] > 1e-9]
    ok = not bad_min and not bad_eval
    gap = max(r["minimum"] - r["brute"] for r in rows)
    record(1, ok, f"300 tensors, worst (optimizer - brute) = {gap:.2e}, "
                  f"max re-evaluation error = {max(r['reeval_error'] for r in rows):.1e}",
           time.perf_counter() - t0)
    assert ok


def _designed_blocks(rng, inside):
    """Blocks whose weak-PIC margin min(a1 + a2, c1 + c2) has a chosen sign."""
    while True:
        a = np.sort(rng.standard_normal(3))
        c12 = np.sort(rng.standard_normal(2))
        c = np.array([c12[0], c12[1], a.sum() - c12.sum()])
        if c[2] >= c[1]:
            break
    d = rng.uniform(0.05, 1.0) * (1 if inside else -1)
    s = (d - min(a[0] + a[1], c[0] + c[1])) / 2  # adding s to every eigenvalue keeps traces equal
    a, c = a + s, c + s
    U, V = (np.linalg.qr(rng.standard_normal((3, 3)))[0] for _ in range(2))
    return U @ np.diag(a) @ U.T, rng.standard_normal((3, 3)), V @ np.diag(c) @ V.T


def test_c02_four_dim_criterion(reports):
    t0 = time.perf_counter()
    disagreements = 0
    wrong_label = 0
    for i in range(200):
        inside = i < 100
        rng = child_rng(2, i)
        X = tensor_from_blocks(*_designed_blocks(rng, inside))
        nrm = frobenius_norm(X)
        opt = min_isotropic(X, "PIC", seed=i).minimum
        blk = fourd.block_decomp(X).pic_margin()
        if abs(opt) > DEAD_ZONE * nrm and abs(blk) > DEAD_ZONE * nrm:
            disagreements += (opt > 0) != (blk > 0)
        wrong_label += (blk > 0) != inside
    ok = disagreements == 0 and wrong_label == 0
    record(2, ok, f"200 samples, {disagreements} disagreements, {wrong_label} mislabelled",
           time.perf_counter() - t0)
    assert ok


def test_c03_q_consistency():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        X = random_tensor(4, child_rng(3, i))
        lhs = q_reaction(X).components
        rhs = fourd.square_components(X.components) + fourd.sharp_lie(X).components
        worst = max(worst, np.abs(lhs - rhs).max() / np.abs(lhs).max())
    ok = worst <= 1e-10
    record(3, ok, f"50 tensors, max relative deviation {worst:.1e}", time.perf_counter() - t0)
    assert ok


def test_c04_kahler_sharp():
    t0 = time.perf_counter()
    worst_block = worst_eig = 0.0
    for name in ("CP2", "CxCP1", "CP1xCP1"):
        Rm, J = kahler_models()[name]
        kf = fourd.kahler_block_form(Rm, J)
        S = fourd.operator_in_basis(rotate(fourd.sharp_operator(Rm), kf.frame),
                                    fourd.lambda_pm_basis())
        scale = frobenius_norm(Rm) ** 2
        c = kf.c
        pairs = np.sort([c[0] * c[1], c[1] * c[2], c[2] * c[0]])
        # sharp is block diagonal with a zero first row: only the C-block survives
        worst_block = max(worst_block, np.abs(S[:3]).max() / scale)
        # operator eigenvalues carry the factor 2 of the operator scale
        eig = np.linalg.eigvalsh(S[3:, 3:]) / fourd.OPERATOR_SCALE
        worst_eig = max(worst_eig, np.abs(eig - pairs).max() / scale)
    ok = worst_block <= 1e-8 and worst_eig <= 1e-8
    record(4, ok, f"CP2, CxCP1, CP1xCP1: block residual {worst_block:.1e}, "
                  f"eigenvalue deviation {worst_eig:.1e} (relative to |Rm|^2)",
           time.perf_counter() - t0)
    assert ok


def test_c05_sphere_blowup():
    t0 = time.perf_counter()
    I = identity_tensor(4)
    c4 = q_identity_constant(4)
    assert np.allclose(q_reaction(I).components, c4 * I.components)
    traj = cones.integrate_hamilton_ode(I, 1.0)
    expected = 1.0 / (c4 * 1.0)
    err = abs(traj.end_time - expected) / expected
    ok = traj.reason == "blowup" and err <= 0.01
    record(5, ok, f"blowup at {traj.end_time:.6f}, expected {expected:.6f}, rel. error {err:.1e}",
           time.perf_counter() - t0)
    assert ok


def test_c06_cone_invariance(reports):
    t0 = time.perf_counter()
    out = {}
    for n in (4, 5):
        for name in cones.CONE_NAMES:
            out[(name, n)] = invariance_report(name, n, 200)
    reports[6] = out
    violations = sum(r["violations"] for r in out.values())
    worst = min(r["min_margin"] for r in out.values())
    monotone = all(r["scalar_monotone"] for r in out.values())
    ok = violations == 0 and monotone
    record(6, ok, f"4 cones x n in (4, 5) x 200 samples: {violations} violations, "
                  f"worst relative margin {worst:.1e}, scalar monotone {monotone}",
           time.perf_counter() - t0)
    assert ok


def test_c07_pinching_invariance(reports):
    t0 = time.perf_counter()
    rows = pinching_rows(100)
    reports[7] = rows
    worst_r = min(r["worst_restricted"] for r in rows)
    in42 = [r for r in rows if r["lemma42_start"] <= 0.25]
    worst_42 = max(r["worst_lemma42"] for r in in42)
    ok = worst_r >= -DEAD_ZONE and worst_42 <= 0.25 + DEAD_ZONE and len(in42) > 0
    record(7, ok, f"100 samples: worst restricted margin {worst_r:.1e}, "
                  f"max ratio on the 1/4 set {worst_42:.4f} ({len(in42)} samples)",
           time.perf_counter() - t0)
    assert ok


def test_c08_comparison_bound():
    from picflow.cli import comparison_sweep
    t0 = time.perf_counter()
    rep, rows = comparison_sweep(100, SEED)
    ok = rep["all_ok"] and len(rows) == 100
    record(8, ok, f"100 cases, min gap {rep['min_gap']:.3e}", time.perf_counter() - t0)
    assert ok


def test_c09_bryant():
    t0 = time.perf_counter()
    W = bryant_soliton(4)
    res = soliton_residual(W).max()
    kr, ks, _ = profile_curvatures(W)
    worst_pic2 = np.inf
    for i in range(10, W.nodes - 1, 10):
        T = warped_curvature(W, i)["tensor"]
        worst_pic2 = min(worst_pic2, min_isotropic(T, "PIC2").minimum / frobenius_norm(T))
    kc = kappa_check(W, np.linspace(1.0, 30.0, 12), centers=[0, 200, 600, 1000])
    ok = (res <= 1e-6 and kr.min() > 0 and ks.min() > 0 and worst_pic2 >= -DEAD_ZONE
          and kc["infimum"] is not None and kc["infimum"] > 0)
    record(9, ok, f"residual {res:.1e}, min sectional ({kr.min():.2e}, {ks.min():.2e}), "
                  f"worst PIC2 {worst_pic2:.2e}, kappa inf {kc['infimum']:.4f} "
                  f"over {kc['evaluated']} balls", time.perf_counter() - t0)
    assert ok


def test_c10_cylinder_constants():
    t0 = time.perf_counter()
    C = cylinder(5)
    theta = uniform_pic_theta(C)
    oracle = refined_min(C, starts=10) / (4 * scalar(C))
    grid = brute_min(C, "PIC", count=50000) / (4 * scalar(C))
    theta_ok = abs(theta - 1 / 24) <= 1e-3 and abs(oracle - 1 / 24) <= 1e-3 and theta <= grid + 1e-12
    worst = 0.0
    for n in (4, 5):
        for tau in (0.1, 1.0, 10.0):
            h = 1e-5 * tau
            d = (shrinking_cylinder(n, tau + h).components
                 - shrinking_cylinder(n, tau - h).components) / (2 * h)
            Q = q_reaction(shrinking_cylinder(n, tau)).components
            worst = max(worst, np.abs(d + Q).max() / np.abs(Q).max())
    ok = theta_ok and worst <= 1e-8
    record(10, ok, f"theta {theta:.6f} (oracle {oracle:.6f}, grid {grid:.6f}, target "
                   f"{1 / 24:.6f}); shrinking cylinder deviation {worst:.1e}",
           time.perf_counter() - t0)
    assert ok


def test_c11_determinism(reports):
    t0 = time.perf_counter()
    if not {1, 6, 7} <= set(reports):
        pytest.skip("needs criteria 1, 6 and 7 in the same session")
    same = []
    # criterion 1: the first 5 tensors per dimension
    again = [r for n in (4, 5, 6) for r in oracle_rows(n, 5)]
    first = [r for r in reports[1] if r["index"] < 5]
    same.append(io.dumps(again) == io.dumps(first))
    # criterion 6: a 5-sample prefix per cone and dimension
    for (name, n), rep in reports[6].items():
        short = invariance_report(name, n, 5)
        same.append(io.dumps(short["rows"]) == io.dumps(rep["rows"][:5]))
    # criterion 7: the first 10 pinched samples
    same.append(io.dumps(pinching_rows(10)) == io.dumps(reports[7][:10]))
    # full report of a small experiment, twice
    a = io.dumps(invariance_report("weak-pic", 4, 3))
    same.append(a == io.dumps(invariance_report("weak-pic", 4, 3)))
    ok = all(same)
    record(11, ok, f"{sum(same)}/{len(same)} reruns byte-identical", time.perf_counter() - t0)
    assert ok
