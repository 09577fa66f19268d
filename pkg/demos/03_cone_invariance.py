"""Small cone invariance and transversality experiments.

Run: python3 demos/03_cone_invariance.py   (about a minute on one core)
"""

from picflow import cones

for name in cones.CONE_NAMES:
    rep = cones.invariance_experiment(name, n=4, samples=5, seed=1)
    print(f"{name:10s} violations = {rep['violations']}  worst relative margin = "
          f"{rep['min_margin']:.2e}  scalar monotone = {rep['scalar_monotone']}")

rep = cones.transversality_tau("weak-pic", 4, samples=5, seed=7)
print(f"\nweak-pic tau estimate over 5 boundary samples: {rep['tau_hat']:.4f}")
