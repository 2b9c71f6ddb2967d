"""Greedy cleaners on Poisson-dusted halflines: simulation and numerical oracles."""

from .dynamics import JumpEvent, SimConfig, TrialSummary, run_trial
from .env import Env, init_env
from .oracle import EscapeTable, eval_P1, log_ratio, solve_P1
from .singleline import SingleLineConfig, estimate_Pk, is_blocking, run_single
from .stats import SweepSpec, env_regularity, run_sweep, wilson_interval, wn_count

__all__ = [
    "Env",
    "EscapeTable",
    "JumpEvent",
    "SimConfig",
    "SingleLineConfig",
    "SweepSpec",
    "TrialSummary",
    "env_regularity",
    "estimate_Pk",
    "eval_P1",
    "init_env",
    "is_blocking",
    "log_ratio",
    "run_single",
    "run_sweep",
    "run_trial",
    "solve_P1",
    "wilson_interval",
    "wn_count",
]

__version__ = "0.1.0"
