"""Line/SimLine oracle chains, an MPC round simulator, and compression codecs."""

from __future__ import annotations

from .chain import InputVector, NodeState, Parameters, ParameterError, parse_input
from .mpc_engine import RunReport, run
from .oracle import Oracle, derive_seed, parse_seed, seed_from_int
from .ram_eval import eval_line, eval_simline, evaluate

__all__ = [
    "InputVector",
    "NodeState",
    "Oracle",
    "ParameterError",
    "Parameters",
    "RunReport",
    "derive_seed",
    "eval_line",
    "eval_simline",
    "evaluate",
    "parse_input",
    "parse_seed",
    "run",
    "seed_from_int",
]

__version__ = "0.1.0"
