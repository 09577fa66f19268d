"""Scalar comparison ODEs: the lower bound for u and backward blowup.

Run: python3 demos/05_comparison_odes.py
"""

from picflow import cones

for u0 in (0.0, -1.0, -100.0):
    r = cones.comparison_ode(u0, C=2.0, Ar=1.0)
    print(f"u0 = {u0:7.1f}: final u = {r['u'][-1]:.4f}, min gap to bound = {r['min_gap']:.4f}, "
          f"bound holds: {r['bound_ok']}")

for f0, delta in ((-1.0, 1.0), (-2.0, 0.5), (-1e-3, 1.0)):
    r = cones.ancient_blowup_check(f0, delta)
    print(f"f0 = {f0:g}, delta = {delta:g}: backward blowup at {r['t_detected']:.4f} "
          f"(closed form {r['t_star']:.4f})")
