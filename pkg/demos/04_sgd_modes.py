"""
Sampled SGD: the literal loss versus the corrected one
======================================================

Two stochastic versions of the update on softmax logits. The literal loss
``log pi_opp(preferred) - log pi(rejected)`` pushes probability onto the
rejected response; the corrected loss ``log pi_opp(rejected) - log pi(preferred)``
pushes it onto the preferred one. Running both on the same game shows which
direction learns.
"""
import numpy as np

from lana import lana_sgd_step, parse_config, random_game, RngStream, run_dynamics, solve_nash, softmax, uniform
from lana.judges import JudgeKind, JudgeVerdict

v = JudgeVerdict("x0", 0, 1, preferred=0, rejected=1, mode=JudgeKind.GROUND_TRUTH_DETERMINISTIC)
for mode in ("sgd_loss_paper", "sgd_loss_corrected"):
    theta, loss = lana_sgd_step(np.zeros(2), uniform(2), v, mode, lr=1.0)
    print(f"{mode:19s} one step on 'response 0 wins': pi = {np.round(softmax(theta), 3)}")

###############################################################################
# A condorcet game: one response beats all others.
g = random_game(RngStream(2), 5, "condorcet")
nash = solve_nash(g)
for mode in ("sgd_loss_paper", "sgd_loss_corrected"):
    cfg = parse_config({"generator": {"n": 5}, "update_mode": mode, "lr": 0.1, "T": 2000})
    traj = run_dynamics(cfg, g, nash, seed=0)
    last = traj.player_records(1)[-1]
    print(f"{mode:19s} winrate vs start {last.mean_winrate_vs_init:.3f}, exploitability {last.mean_exploitability:.3f}")
