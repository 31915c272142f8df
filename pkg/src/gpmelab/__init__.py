"""1D finite-volume lab for the generalized porous medium equation p_t = (k(p) p_x)_x."""

from ._accel import backend, set_backend, using_backend
from .coefficients import CoefficientModel, DegeneracyReport, degeneracy_check, evaluate
from .diagnostics import (ConvergenceReport, OscillationReport, ProbeSeries, convergence_study,
                          default_front_threshold, detect_oscillations, error_norms, fit_order,
                          reference_solution, restrict, tlp_exact, track_front)
from .errors import ConfigurationError, DomainError, GPMEError, NumericalFailure
from .flux import (AveragingRule, MHMMode, SpatialOperatorConfig, face_average, face_flux,
                   face_velocity, mhm_correction, spatial_operator, truncation_leading)
from .grid import (Dirichlet, Field, Grid1D, Preset, ProblemSetup, apply_bc, build_initial,
                   front_setup, linear_setup, tlp_setup)
from .modeq import ModEqCoefficients, coefficients, oscillation_predictor
from .timestepping import (DtRule, IntegratorConfig, SimulationResult, TimeScheme, simulate,
                           stability_guard, step_backward_euler, step_forward_euler, step_tvd_rk2)

__version__ = "0.1.0"
