"""Cooperative RSSI tracking of an intermittent RF emitter by a tracker swarm."""
from .bayes import GridPosterior, GridSpec, grid_predict, grid_update, init_grid, mmse_estimate
from .channel import (
    ChannelParams,
    Measurement,
    QuadratureSpec,
    dbm_to_mw,
    expected_measurement,
    measurement_log_likelihood,
    mw_to_dbm,
    noise_covariance,
    sample_measurement,
)
from .ekf import EkfBelief, detect_and_update, ekf_predict, initial_belief, measurement_jacobian
from .errors import ConfigurationError, DegenerateGeometryError, NumericalWarning, QuadratureError
from .fisher import HessianMCConfig, d_criterion, fim_predict, fim_update, measurement_info_d4, process_info
from .motion import MotionModel, build_motion_model, step_target
from .planner import HeadingPlan, PlannerConfig, apply_plan, bio_inspired_plan, steepest_descent_plan
from .sim import ScenarioConfig, fig4_scenario, fig4_traces, run_batch, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ConfigurationError",
    "DegenerateGeometryError",
    "EkfBelief",
    "GridPosterior",
    "GridSpec",
    "HeadingPlan",
    "HessianMCConfig",
    "Measurement",
    "MotionModel",
    "NumericalWarning",
    "PlannerConfig",
    "QuadratureError",
    "QuadratureSpec",
    "ScenarioConfig",
    "apply_plan",
    "bio_inspired_plan",
    "build_motion_model",
    "d_criterion",
    "dbm_to_mw",
    "detect_and_update",
    "ekf_predict",
    "expected_measurement",
    "fig4_scenario",
    "fig4_traces",
    "fim_predict",
    "fim_update",
    "grid_predict",
    "grid_update",
    "init_grid",
    "initial_belief",
    "measurement_info_d4",
    "measurement_jacobian",
    "measurement_log_likelihood",
    "mmse_estimate",
    "mw_to_dbm",
    "noise_covariance",
    "process_info",
    "run_batch",
    "run_scenario",
    "sample_measurement",
    "steepest_descent_plan",
    "step_target",
]
