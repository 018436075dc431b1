"""Glued metric horns: weighted warped products over the round 2-sphere.

Profiles and curvature certificates, distortion coefficients, geodesics,
harmonic functions by separation of variables, and vanishing-order diagnostics
at the vertex.
"""

from . import cdtools, curvature, decay, geometry, harmonic, jets, profiles, smoothing
from .cdtools import sigma, tau
from .curvature import certify_lower_bound, horn_metric, pure_horn_metric
from .decay import decay_report, quasipoly_fit, vio_table
from .errors import *  # noqa: F401,F403
from .geometry import HornPoint, geodesic_distance
from .harmonic import dirichlet_solve, mean_square, solve_radial
from .profiles import GluingParams, build_warping, build_weight, preset

__version__ = "0.1.0"
