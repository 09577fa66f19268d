"""Isotropic curvature minima of a few model tensors.

Run: python3 demos/01_isotropic_conditions.py
"""

import numpy as np

from picflow import fourd, models
from picflow.isotropic import min_isotropic, uniform_pic_lambda4, uniform_pic_theta
from picflow.tensor import identity_tensor

cases = {
    "sphere S^4": identity_tensor(4),
    "cylinder S^3 x R": models.cylinder(4),
    "S^2 x R^2": models.product(models.sphere_factor(2), models.flat_factor(2)),
    "CP^2": models.kahler_models()["CP2"][0],
}

print(f"{'tensor':18s} {'PIC':>9s} {'PIC1':>9s} {'PIC2':>9s}")
for name, T in cases.items():
    vals = [min_isotropic(T, mode).minimum for mode in ("PIC", "PIC1", "PIC2")]
    print(f"{name:18s} " + " ".join(f"{v:9.4f}" for v in vals))

# in dimension 4 the weak-PIC test reduces to min(a1 + a2, c1 + c2) >= 0
print("\nblock eigenvalues (operator scale 2):")
for name, T in cases.items():
    bd = fourd.block_decomp(T)
    print(f"  {name:18s} a={np.round(bd.a, 3)} b={np.round(bd.b, 3)} c={np.round(bd.c, 3)}"
          f"  margin={bd.pic_margin():.3f}")

print("\nLambda(S^4) =", uniform_pic_lambda4(identity_tensor(4)))
print("theta(S^4 x R) =", uniform_pic_theta(models.cylinder(5)), " (1/24 =", 1 / 24, ")")
