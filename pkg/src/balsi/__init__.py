"""Regulation-triggered adaptive control with a batch least-squares identifier."""

from .control import LtiLaw, WingRockLaw, lti_design, lyapunov_decay_residual
from .errors import (BalsiError, DomainError, InfeasibleConstraint, NonConvergence,
                     NonFiniteState, NumericalError, ParseError, StepFailure, ValidationError)
from .hybrid import HybridTrajectory, IntegratorConfig, TriggerSpec, integrate_segment
from .identifier import UpdateConfig, update_exact, update_regularized
from .kernels import BACKEND
from .plants import BoxSet, NoiseSpec, PlantModel, lti_chain, measure, wing_rock
from .runner import run_balsi, run_scenario
from .scenario import Scenario, load, loads, preset

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BalsiError", "BoxSet", "DomainError", "HybridTrajectory", "InfeasibleConstraint",
    "IntegratorConfig", "LtiLaw", "NoiseSpec", "NonConvergence", "NonFiniteState",
    "NumericalError", "ParseError", "PlantModel", "Scenario", "StepFailure", "TriggerSpec",
    "UpdateConfig", "ValidationError", "WingRockLaw", "integrate_segment", "load", "loads",
    "lti_chain", "lti_design", "lyapunov_decay_residual", "measure", "preset", "run_balsi",
    "run_scenario", "update_exact", "update_regularized", "wing_rock",
]
