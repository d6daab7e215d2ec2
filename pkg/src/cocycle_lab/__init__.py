"""Lyapunov exponents of rotated families of 2x2 linear cocycles with dominated splitting."""
from .base import (BaseSystem, OrbitBuffer, birkhoff_average, circle_rotation, periodic_orbit,
                   torus_automorphism)
from .cocycle import (CocycleSpec, compose_n, constant_cocycle, lyap_minus_direct, lyap_plus_direct,
                      lyap_sum_via_det, rotate_family, rotation)
from .domination import (DOMINATED, INCONCLUSIVE, NOT_DOMINATED, DominationCertificate, certify, dset_sweep, refute, strong_section,
                         verdict_boundaries, weak_section)
from .estimator import RotationFamilyLyapunov
from .exceptions import (CocycleError, ConfigError, Inconclusive, NonFiniteObservable, NonInvertible,
                         NonPositiveDenominator, ProductOverflow)
from .heisenberg import HeisenbergModel, corollary_main_report, ecu_cocycle, family_theta
from .theta import (DerivativeData, SweepResult, ddlambda0, derivative_data, dlambda0, entries_theta,
                    hyperbolicity_interval, lyap_plus_theta, sweep, t_theta, u_theta, uddot0, udot0)
from .triangular import (TriangularCocycle, build_triangular, check_norm_equality, triangular_from_functions,
                         triangularize_point)

__version__ = "0.1.0"
