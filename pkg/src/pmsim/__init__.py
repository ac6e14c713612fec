"""Discrete-time simulator of parallel posture and movement control loops."""

from .engine import (
    COLUMNS,
    BUILTIN_SCENARIOS,
    LoopConfig,
    Metrics,
    SimConfig,
    SimulationError,
    Trace,
    compute_metrics,
    builtin_config,
    run_paper_scenario,
    set_param,
    simulate,
    sweep,
)
from .kalman import KalmanConfig, NoiseModel, kalman_step, solve_dare
from .lti import StateSpaceModel, dc_gain, lti_step, tf_to_ss
from .pid import PidConfig, PidState, pid_reset, pid_step
from .scenario import ScenarioError, parse_scenario, serialize_scenario
from .signals import Constant, Pulse, Step, Sum, eval_signal, sample_signal

__version__ = "0.1.0"
