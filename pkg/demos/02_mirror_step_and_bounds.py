"""
One mirror step and what it guarantees
======================================

With the reward ``delta = gamma * log(pi_tilde / pi_t)`` an entropic mirror
step lands exactly on the geometric mixture ``pi_t^(1-gamma) pi_tilde^gamma``.
The KL to the equilibrium then contracts towards ``KL(pi*, pi_tilde)`` up to a
term in the size of the reward.
"""
import numpy as np

from lana import (
    BoundParams,
    adaptive_delta,
    apply_floor,
    geometric_mixture,
    horizon_bound_check,
    kl_divergence,
    lemma_step_check,
    maio_update,
    parse_config,
    rps_matrix,
    run_dynamics,
    single_context,
    solve_nash,
)

pi_t = np.array([0.5, 0.5])
pi_tilde = np.array([0.8, 0.2])
step = adaptive_delta(pi_t, pi_tilde, gamma=0.5)
print("delta:", step.delta)
print("mirror step:", maio_update(pi_t, step), "geometric mixture:", geometric_mixture(pi_t, pi_tilde, 0.5))

###############################################################################
# Slack of the one-step inequality on random triples (negative = violated).
rng = np.random.default_rng(0)
slacks = []
for _ in range(500):
    star, p, tilde = (apply_floor(rng.dirichlet(np.ones(6))) for _ in range(3))
    nxt = maio_update(p, adaptive_delta(p, tilde, 0.3))
    slacks.append(lemma_step_check(star, p, nxt, tilde, 0.3, BoundParams()))
print(f"one-step slack: min {min(slacks):.3e}, median {np.median(slacks):.3e}")

###############################################################################
# Feeding the exact equilibrium as the improved opponent contracts
# geometrically at rate (1 - gamma).
g = single_context(rps_matrix())
cfg = parse_config({"generator": {"n": 3}, "construction": "expert_policy", "gamma": 0.3, "T": 30, "init": "random"})
traj = run_dynamics(cfg, g, solve_nash(g), seed=0)
kl = [r.kl_to_star[0] for r in traj.player_records(1)]
print("KL to equilibrium, every 5 steps:", np.round(kl[::5], 6))
hb = horizon_bound_check(traj)
print("horizon bound holds:", hb["holds"], "lhs", f"{hb['lhs']:.2e}", "rhs", f"{hb['rhs']:.2e}")
