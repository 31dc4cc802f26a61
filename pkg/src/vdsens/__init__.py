"""Vehicle dynamics models with direct-method parameter sensitivities."""

from .dynamics import DOUBLE_TRACK, SINGLE_TRACK, dt_rhs, st_matrices, st_params_from_dt, st_rhs
from .params import ControlInput, MagicFormulaCoeffs, ParamSet, StParams, validate_params
from .scenario import FaultEvent, Reference, Scenario, synth_odd_trajectory
from .sensitivity import beta_sensitivity, model_jacobian, param_jacobian, sensitivity_rhs, steady_state_sensitivity_st
from .sim import IntegratorConfig, SimOutput, run_scenario

__version__ = "0.1.0"

__all__ = [
    "DOUBLE_TRACK",
    "SINGLE_TRACK",
    "ControlInput",
    "FaultEvent",
    "IntegratorConfig",
    "MagicFormulaCoeffs",
    "ParamSet",
    "Reference",
    "Scenario",
    "SimOutput",
    "StParams",
    "beta_sensitivity",
    "dt_rhs",
    "model_jacobian",
    "param_jacobian",
    "run_scenario",
    "sensitivity_rhs",
    "st_matrices",
    "st_params_from_dt",
    "st_rhs",
    "steady_state_sensitivity_st",
    "synth_odd_trajectory",
    "validate_params",
]
