"""Preference verdicts between sampled responses and the improved opponent.

A player draws two responses from its own policy, asks a judge which one is
better, and treats the preferred response as a sample of an improved
opponent. Judges either read the ground-truth preference matrix or score the
two responses with some policy (the opponent itself, or the equilibrium).
Scoring by policy probability is the tabular stand-in for reading the
next-token scores of "1" and "2" off an evaluation prompt.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .game import FLOOR, ContextGame, apply_floor, point_mass, uniform

MAX_REDRAWS = 16


class JudgeKind(str, Enum):
    GROUND_TRUTH_DETERMINISTIC = "ground_truth_deterministic"
    GROUND_TRUTH_SAMPLED = "ground_truth_sampled"
    SELF_JUDGE = "self_judge"
    EXPERT = "expert"


class Construction(str, Enum):
    SMOOTHED_PREFERRED = "smoothed_preferred"
    BEST_RESPONSE = "best_response"
    EXPERT_POLICY = "expert_policy"


@dataclass(frozen=True)
class JudgeMode:
    kind: JudgeKind = JudgeKind.GROUND_TRUTH_DETERMINISTIC
    noise_epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", JudgeKind(self.kind))
        if not 0.0 <= self.noise_epsilon < 0.5:
            raise ValueError(f"noise_epsilon must lie in [0, 1/2), got {self.noise_epsilon}")


@dataclass(frozen=True)
class JudgeVerdict:
    context_id: str
    candidate_a: int
    candidate_b: int
    preferred: int
    rejected: int
    mode: JudgeKind
    flipped_by_noise: bool = False
    tie: bool = False


def sample_pair(pi, gen: np.random.Generator) -> tuple[int, int] | None:
    """Draw two distinct responses from ``pi``.

    Both draws are repeated together when they coincide, so the returned
    pair follows ``pi x pi`` conditioned on being distinct. Returns ``None``
    (duplicate-pair signal) if every attempt collides.
    """
    pi = np.asarray(pi, dtype=float)
    cdf = np.cumsum(pi)
    # all attempts are drawn up front: a fixed number of draws per call
    u = gen.random((1 + MAX_REDRAWS, 2)) * cdf[-1]
    draws = np.minimum(np.searchsorted(cdf, u, side="right"), pi.size - 1)
    distinct = np.flatnonzero(draws[:, 0] != draws[:, 1])
    if distinct.size == 0:
        return None
    y, y2 = draws[distinct[0]]
    return int(y), int(y2)


def _order_verdict(score_y: float, score_y2: float) -> tuple[bool, bool]:
    """(prefer first, tie); ties go to the first candidate."""
    if score_y == score_y2:
        return True, True
    return bool(score_y > score_y2), False


def judge(
    mode: JudgeMode,
    g_ctx: ContextGame,
    opponent,
    y: int,
    y_prime: int,
    gen: np.random.Generator,
    expert=None,
) -> JudgeVerdict:
    """Decide which of ``y`` and ``y_prime`` is preferred.

    Args:
        mode: judge kind and verdict-flip noise.
        g_ctx: context holding the ground-truth preference matrix.
        opponent: the judging opponent's probability vector on this context
            (read only by ``SELF_JUDGE``).
        y, y_prime: distinct candidate responses, in prompt order.
        gen: random generator; two uniforms are consumed per call whatever
            the mode, so stream positions do not depend on the judge.
        expert: equilibrium vector, required by ``EXPERT``.
    """
    if y == y_prime:
        raise ValueError("judge needs two distinct responses")
    u_sample, u_noise = gen.random(2)
    tie = False
    kind = mode.kind
    if kind is JudgeKind.GROUND_TRUTH_DETERMINISTIC:
        first, tie = _order_verdict(g_ctx.P[y, y_prime], 0.5)
    elif kind is JudgeKind.GROUND_TRUTH_SAMPLED:
        first = bool(u_sample < g_ctx.P[y, y_prime])
    elif kind is JudgeKind.SELF_JUDGE:
        first, tie = _order_verdict(opponent[y], opponent[y_prime])
    else:
        if expert is None:
            raise ValueError("expert judge needs the equilibrium policy")
        first, tie = _order_verdict(expert[y], expert[y_prime])
    flipped = bool(u_noise < mode.noise_epsilon)
    if flipped:
        first = not first
    preferred, rejected = (y, y_prime) if first else (y_prime, y)
    return JudgeVerdict(g_ctx.context_id, y, y_prime, preferred, rejected, kind, flipped, tie)


def smoothed_preferred(n: int, preferred: int, mu: float = 0.01, eps: float = FLOOR) -> np.ndarray:
    return apply_floor((1.0 - mu) * point_mass(n, preferred) + mu * uniform(n), eps)


def best_response(P: np.ndarray, pi, eps: float = FLOOR) -> np.ndarray:
    """Floored point mass on the response with the highest win rate against ``pi``."""
    scores = np.asarray(P) @ np.asarray(pi)
    return apply_floor(point_mass(len(scores), int(np.argmax(scores))), eps)


def build_improved_opponent(
    construction,
    n: int,
    verdict: JudgeVerdict | None = None,
    P: np.ndarray | None = None,
    pi=None,
    pi_star=None,
    mu: float = 0.01,
    eps: float = FLOOR,
) -> np.ndarray:
    """Realized improved-opponent distribution for one context."""
    construction = Construction(construction)
    if construction is Construction.SMOOTHED_PREFERRED:
        if verdict is None:
            raise ValueError("smoothed_preferred needs a verdict")
        return smoothed_preferred(n, verdict.preferred, mu, eps)
    if construction is Construction.BEST_RESPONSE:
        if P is None or pi is None:
            raise ValueError("best_response needs the preference matrix and current policy")
        return best_response(P, pi, eps)
    if pi_star is None:
        raise ValueError("expert_policy needs the equilibrium")
    return apply_floor(pi_star, eps)
