"""Curvature conditions, the curvature reaction ODE and model geometries.

Algebraic curvature tensors on R^n (4 <= n <= 12), the family of positive
isotropic curvature conditions, the four-dimensional self-dual block
decomposition, Hamilton's reaction ODE dRm/dt = Q(Rm) with cone-invariance
experiments, and model geometries from round spheres to the Bryant soliton.
"""

from .cones import (ConeSpec, ODETrajectory, ancient_blowup_check, builtin_cones,
                    comparison_ode, integrate_hamilton_ode, invariance_experiment,
                    pinching_trajectories, support_level, tangent_inward_margin,
                    transversality_tau)
from .errors import *  # noqa: F401,F403
from .fourd import (BlockDecomp, block_decomp, kahler_block_form, pinching_report,
                    psd_curvature_operator, sharp_lie, sharp_operator)
from .isotropic import (IsotropicReport, isotropic_value, min_isotropic,
                        random_weakly_pic, uniform_pic_lambda4, uniform_pic_theta)
from .models import (WarpedMetric, bryant_soliton, cylinder, fubini_study, kahler_models,
                     kappa_check, product, shrinking_cylinder, space_form, volume_ratio,
                     warped_curvature)
from .tensor import (CurvatureTensor, identity_tensor, kulkarni_nomizu, l_ab_invert,
                     l_ab_transform, make_tensor, q_identity_constant, q_reaction, ricci,
                     scalar, zero_tensor)

__version__ = "0.1.0"
