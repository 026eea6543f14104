"""Følner averages of W*-dynamical systems on finite-dimensional algebras.

The norm of the Følner average of ``iota(a)`` converges to the largest value
of ``a`` on invariant states that vanish on ``ker iota``; this package
computes both sides and the inequalities in between.
"""

from folnerlab.config import ConfigError, ExperimentConfig, load_config, parse_config
from folnerlab.cstar import CStarModel, apply_iota, pullback_state, pushforward_state, quotient_model
from folnerlab.dynamics import Action, WStarSystem, ergodic_average, mean_ergodic_projection, norm_sequence
from folnerlab.groups import FiniteGroup, HeisenbergGroup, ZdGroup, folner_defect, folner_set
from folnerlab.harness import check_inequalities, emit_csv, run_experiment
from folnerlab.kernels import BACKEND
from folnerlab.matrix import BlockElement, BlockState, norming_state, operator_norm, state_eval
from folnerlab.optimize import m_value, sdp_cross_check
from folnerlab.systems import generate_example

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BACKEND",
    "BlockElement",
    "BlockState",
    "CStarModel",
    "ConfigError",
    "ExperimentConfig",
    "FiniteGroup",
    "HeisenbergGroup",
    "WStarSystem",
    "ZdGroup",
    "apply_iota",
    "check_inequalities",
    "emit_csv",
    "ergodic_average",
    "folner_defect",
    "folner_set",
    "generate_example",
    "load_config",
    "m_value",
    "mean_ergodic_projection",
    "norm_sequence",
    "norming_state",
    "operator_norm",
    "parse_config",
    "pullback_state",
    "pushforward_state",
    "quotient_model",
    "run_experiment",
    "sdp_cross_check",
    "state_eval",
]
