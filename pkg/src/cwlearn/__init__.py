"""cwlearn: slotted CSMA/CA simulator plus learned contention-window control."""

from .backoff_models import (NoBackoffRegime, QuantScheme, aba_cw, clamp_cw,
                             quantize, r_squared, theory_attempt_probability)
from .bench_cli import avg_sigl, jain_index
from .controller import (ControllerConfig, ControlSurface, RunLog,
                         parse_policy, run_replay, serve_status)
from .kernel import BACKEND, COMPILED
from .mac_sim import (BackoffPolicy, ContentionSim, PeriodMetrics, SimConfig,
                      StationState, beb_next_cw, measured_attempt_probability,
                      sample_backoff, simulate_period)
from .online_learner import LearnerConfig, OnlineLearner
from .workload import GenParams, Trace, generate_trace, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "COMPILED", "BackoffPolicy", "ContentionSim", "ControllerConfig",
    "ControlSurface", "GenParams", "LearnerConfig", "NoBackoffRegime",
    "OnlineLearner", "PeriodMetrics", "QuantScheme", "RunLog", "SimConfig",
    "StationState", "Trace", "aba_cw", "avg_sigl", "beb_next_cw", "clamp_cw",
    "generate_trace", "jain_index", "load_trace", "measured_attempt_probability",
    "parse_policy", "quantize", "r_squared", "run_replay", "sample_backoff",
    "save_trace", "serve_status", "simulate_period",
    "theory_attempt_probability", "__version__",
]
