"""The reaction ODE dRm/dt = Q(Rm) on the sphere, the cylinder and a pinched sample.

Run: python3 demos/02_reaction_ode.py
"""

from picflow import cones, models
from picflow.tensor import identity_tensor, q_identity_constant, scalar

# the round sphere stays round and blows up at 1/(c_n rho_0)
traj = cones.integrate_hamilton_ode(identity_tensor(4), horizon=1.0)
print(f"sphere: {traj.reason} at t = {traj.end_time:.6f}, "
      f"closed form {1 / q_identity_constant(4):.6f}, {traj.accepted} steps")

# the cylinder stays a cylinder: only the S^3 factor shrinks
C = models.cylinder(4)
traj = cones.integrate_hamilton_ode(C, horizon=0.2, sample_times=[0.0, 0.1, 0.2])
for t, T in traj.samples.items():
    print(f"cylinder t = {t:.1f}: scalar ratio {scalar(T) / scalar(C):.5f}, "
          f"closed form {1 / (1 - 4 * t):.5f}")

# pinching quantities of one sample until its scalar curvature doubles
X = cones.pinched_samples(1, seed=3)[0]
out = cones.pinching_trajectories(X, checkpoints=4)
print(f"\npinched sample, K = {out['K']:.3f}, stopped by {out['reason']}")
for row in out["rows"]:
    print(f"  t = {row['t']:.4f}  a = {[round(v, 4) for v in row['a']]}  "
          f"lemma42 = {row['lemma42']:.4f}  restricted min = {min(row['restricted']):.4f}")
