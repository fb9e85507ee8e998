"""
Solving preference games
========================

A preference game is a matrix ``P`` with ``P[a, b]`` the probability that
response ``a`` is preferred to ``b``. Its symmetric Nash equilibrium is the
reference point every learner below is measured against.
"""
import numpy as np

from lana import brute_force_nash, exploitability, random_game, rps_matrix, solve_nash, RngStream

###############################################################################
# Rock, paper, scissors: the only unexploitable policy is uniform.
sol = solve_nash(rps_matrix())
print("RPS equilibrium:", np.round(sol.pi_star, 6), "via", sol.method)
print("exploitability of always-rock:", exploitability(rps_matrix(), np.array([1.0, 0.0, 0.0])))

###############################################################################
# Random games of three kinds. Small ones are cross-checked against
# exhaustive support enumeration.
for kind in ("uniform", "condorcet", "cyclic"):
    ctx = random_game(RngStream(7), 4, kind)[0]
    mw, bf = solve_nash(ctx), brute_force_nash(ctx)
    gap = 0.5 * np.abs(mw.pi_star - bf.pi_star).sum()
    print(f"{kind:9s} support={np.flatnonzero(mw.pi_star > 1e-6)} "
          f"exploit={mw.exploitability:.1e} tv-to-brute-force={gap:.1e}")

###############################################################################
# Larger games are solved with averaged multiplicative weights; an exact
# linear program takes over only if the averaged iterate stalls.
big = random_game(RngStream(3), 20, "uniform", contexts=3)
whole = solve_nash(big)
print("20x20, 3 contexts:", [c.method for c in whole.contexts], f"max exploit {whole.exploitability:.1e}")
