"""Robust sampled-data MPC with barrier-function safety for a ship-mounted crane."""

from ._accel import USE_NUMBA
from .barrier import BarrierConfig, DeltaResult, adapt_delta, class_k, rzocbf_margin, theta_gap
from .dynamics import (BaseMotionProfile, BaseMotionSample, CraneParameters, CraneState,
                       GeneralizedCoordinates, UncertaintyRealization, VelocityCommand,
                       base_motion)
from .harness import (ScenarioConfig, compare_nominal_robust, compute_metrics, load_config,
                      run_scenario)
from .integrator import CraneModel, FlowConfig, partial_flow, perturbed_flow, step
from .mpc import Controller, OCPConfig, control_step
from .safety import (BoxSpec, ObstacleSet, SafetyBox, TargetSafetyParams, box_safety,
                     composite_safety, target_safety, target_safety_gradient, update_box)

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "BarrierConfig", "DeltaResult", "adapt_delta", "class_k", "rzocbf_margin",
    "theta_gap", "BaseMotionProfile", "BaseMotionSample", "CraneParameters", "CraneState",
    "GeneralizedCoordinates", "UncertaintyRealization", "VelocityCommand", "base_motion",
    "ScenarioConfig", "compare_nominal_robust", "compute_metrics", "load_config",
    "run_scenario", "CraneModel", "FlowConfig", "partial_flow", "perturbed_flow", "step",
    "Controller", "OCPConfig", "control_step", "BoxSpec", "ObstacleSet", "SafetyBox",
    "TargetSafetyParams", "box_safety", "composite_safety", "target_safety",
    "target_safety_gradient", "update_box",
]
