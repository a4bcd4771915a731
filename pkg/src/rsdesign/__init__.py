"""Optimal experimental design for nonlinear regression.

Computes, certifies and simulates fixed locally optimal designs ("flod"),
one-step-ahead adaptive optimal designs ("aod") and reweighted sequential
designs driven by the observed information of the accumulated data
("rsd"), for nonlinear mean functions with heavy-tailed additive errors.
"""

__version__ = "0.1.0"

from . import (  # noqa: E402,F401
    adaptive,
    cli,
    config,
    criteria,
    design_solver,
    errors,
    estimation,
    exceptions,
    information,
    models,
    quadrature,
    sim,
)
from .adaptive import aod_strategy, flod_strategy, rsd_strategy, run_experiment  # noqa: F401
from .criteria import Criterion, c_criterion, d_criterion, nu, phi, psi  # noqa: F401
from .design_solver import Design, ExactDesign, adams_round, certify, flod_solve  # noqa: F401
from .errors import ErrorDist, cauchy, curvature_sq, exp_power, q_gaussian, unit_info  # noqa: F401
from .estimation import ExperimentState, cluster, fit_location, fit_theta  # noqa: F401
from .information import InfoMatrix, cond_info_oracle  # noqa: F401
from .models import ModelSpec, eta, grad_eta, hess_eta  # noqa: F401
from .sim import SimConfig, run_study  # noqa: F401
