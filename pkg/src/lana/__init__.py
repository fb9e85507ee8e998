"""Nash learning by mirror descent against adaptive feedback from an improved opponent.

Tabular preference games, an exact equilibrium oracle, the exact and SGD
forms of the two-player update, and numerical checks of its KL bounds.
"""
from .analysis import BoundParams, StepRecord, Trajectory, horizon_bound_check, lemma_step_check, summarize
from .config import ConfigError, RunConfig, parse_config
from .dynamics import (
    adaptive_delta,
    geometric_mixture,
    lana_exact_step,
    lana_loss,
    lana_loss_grad,
    lana_sgd_step,
    maio_update,
    mirror_map,
    run_dynamics,
)
from .game import (
    ContextGame,
    LogitPolicy,
    PreferenceGame,
    RngStream,
    apply_floor,
    entropy,
    expected_winrate,
    kl_divergence,
    random_game,
    rps_matrix,
    single_context,
    softmax,
    uniform,
    validate_game,
)
from .harness import run_command
from .judges import JudgeKind, JudgeMode, JudgeVerdict, build_improved_opponent, judge, sample_pair
from .nash import NashSolution, brute_force_nash, exploitability, solve_nash

__version__ = "0.1.0"
