"""Numerical checks of the one-step and horizon KL inequalities.

For the entropic mirror step ``pi_next ∝ pi_t^(1-gamma) * pi_tilde^gamma``
and any reference ``pi``,

    KL(pi, pi_next) <= (1-gamma) KL(pi, pi_t) + gamma KL(pi, pi_tilde)
                       + (2/sigma) ||delta||_q^2,

with ``delta = gamma * log(pi_tilde / pi_t)``. Iterating it with a constant
step gives the horizon bound

    KL(pi*, pi_T) <= KL(pi*, pi_tilde_c) + exp(-gamma T) KL(pi*, pi_0)
                     + (2 / (gamma sigma)) max_t ||delta_t||_q^2,

where ``c`` indexes the improved opponent farthest from ``pi*``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import SupportError, kl_divergence

SLACK_TOL = -1e-9


class UnsupportedScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    """Strong convexity of negative entropy: modulus ``sigma`` w.r.t. the l_p norm.

    Negative entropy is 1-strongly convex w.r.t. l_1 on the simplex (Pinsker),
    hence the defaults ``sigma=1, p=1, q=inf``.
    """

    sigma: float = 1.0
    p_norm: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.p_norm >= 1:
            raise ValueError("p_norm must be >= 1")

    @property
    def q_norm(self) -> float:
        return math.inf if self.p_norm == 1 else self.p_norm / (self.p_norm - 1)

    def norm(self, v) -> float:
        return float(np.linalg.norm(np.asarray(v, dtype=float), ord=self.q_norm))


def lemma_step_check(pi_star, pi_t, pi_t1, pi_tilde, gamma: float, bp: BoundParams = BoundParams()) -> float:
    """Slack ``RHS - LHS`` of the one-step inequality (negative means violated).

    ``pi_t1`` is taken as given; ``delta`` is recomputed from ``pi_t``,
    ``pi_tilde`` and ``gamma``. Raises ``SupportError`` when ``pi_t`` or
    ``pi_tilde`` lacks full support.
    """
    pi_t = np.asarray(pi_t, dtype=float)
    pi_tilde = np.asarray(pi_tilde, dtype=float)
    if np.any(pi_t <= 0) or np.any(pi_tilde <= 0):
        raise SupportError("lemma check needs full-support pi_t and pi_tilde")
    delta = gamma * (np.log(pi_tilde) - np.log(pi_t))
    rhs = (
        (1.0 - gamma) * kl_divergence(pi_star, pi_t)
        + gamma * kl_divergence(pi_star, pi_tilde)
        + (2.0 / bp.sigma) * bp.norm(delta) ** 2
    )
    lhs = kl_divergence(pi_star, pi_t1)
    return rhs - lhs


@dataclass
class StepRecord:
    """Diagnostics of one player after step ``t``; arrays are per context.

    ``t = 0`` is the initial record. Entries for contexts that were not
    updated at this step carry ``nan`` in ``kl_to_tilde`` and ``loss``, zero
    ``delta_qnorm`` and zero ``lemma_slack``.
    """

    t: int
    player: int
    gamma: float
    kl_to_star: np.ndarray
    kl_to_tilde: np.ndarray
    delta_qnorm: np.ndarray
    winrate_vs_init: np.ndarray
    exploitability: np.ndarray
    loss: np.ndarray
    lemma_slack: np.ndarray
    entropy: np.ndarray
    updated: np.ndarray
    flags: list

    @property
    def mean_kl_to_star(self) -> float:
        return float(np.mean(self.kl_to_star))

    @property
    def mean_winrate_vs_init(self) -> float:
        return float(np.mean(self.winrate_vs_init))

    @property
    def mean_exploitability(self) -> float:
        return float(np.mean(self.exploitability))


@dataclass
class Trajectory:
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    pi_star: list = field(default_factory=list)
    initial_policies: list = field(default_factory=list)
    final_policies: list = field(default_factory=list)
    context_ids: list = field(default_factory=list)
    constant_gamma: float | None = None
    error: str | None = None

    def player_records(self, player: int) -> list[StepRecord]:
        return [r for r in self.records if r.player == player]

    @property
    def players(self) -> list[int]:
        return sorted({r.player for r in self.records})

    @property
    def T(self) -> int:
        return max((r.t for r in self.records), default=0)


def horizon_bound_check(traj: Trajectory, bp: BoundParams = BoundParams()) -> dict:
    """Evaluate the horizon bound for every (player, context) of a run.

    ``T`` for a context is the number of updates actually applied to it
    (steps skipped for duplicate pairs, or spent on another context, do not
    contract). ``holds`` is true only if every (player, context) satisfies it.

    Raises:
        UnsupportedScheduleError: the run did not use a constant step size.
    """
    if traj.constant_gamma is None:
        raise UnsupportedScheduleError("the horizon bound is stated for a constant step size")
    gamma = traj.constant_gamma
    rows = []
    for player in traj.players:
        recs = traj.player_records(player)
        first, last = recs[0], recs[-1]
        for k, cid in enumerate(traj.context_ids):
            upd = [r for r in recs[1:] if r.updated[k]]
            steps = len(upd)
            kl_tilde = [r.kl_to_tilde[k] for r in upd]
            c = int(upd[int(np.argmax(kl_tilde))].t) if upd else 0
            kl_c = float(max(kl_tilde)) if upd else 0.0
            dmax = float(max((r.delta_qnorm[k] for r in upd), default=0.0))
            contraction = math.exp(-gamma * steps) * float(first.kl_to_star[k])
            norm_term = 2.0 / (gamma * bp.sigma) * dmax**2
            lhs = float(last.kl_to_star[k])
            rhs = kl_c + contraction + norm_term
            rows.append({
                "player": player, "context": cid, "steps": steps, "c": c,
                "lhs": lhs, "rhs": rhs, "kl_to_tilde_c": kl_c,
                "contraction_term": contraction, "norm_term": norm_term,
                "holds": bool(lhs <= rhs),
            })
    return {
        "holds": all(r["holds"] for r in rows),
        "lhs": max((r["lhs"] for r in rows), default=0.0),
        "rhs": min((r["rhs"] for r in rows), default=0.0),
        "components": rows,
    }


def summarize(traj: Trajectory, bp: BoundParams = BoundParams()) -> dict:
    """Fill and return ``traj.summary``."""
    if not traj.records:
        raise ValueError("cannot summarize an empty trajectory")
    summary = {"T": traj.T, "players": {}}
    for player in traj.players:
        recs = traj.player_records(player)
        steps = recs[1:]
        slack = np.array([s for r in steps for s, u in zip(r.lemma_slack, r.updated) if u and np.isfinite(s)])
        kt = np.array([r.kl_to_tilde for r in recs])
        with np.errstate(invalid="ignore"):
            masked = np.where(np.isfinite(kt), kt, -np.inf)
        # argmax over all logged improved opponents (per context, then overall)
        flat = int(np.argmax(masked.max(axis=1))) if np.isfinite(masked).any() else 0
        c = int(recs[flat].t) if np.isfinite(masked).any() else 0
        kl_series = np.array([r.mean_kl_to_star for r in recs])
        diffs = np.diff(kl_series)
        last = recs[-1]
        summary["players"][str(player)] = {
            "final_kl_to_star": last.mean_kl_to_star,
            "final_kl_to_star_per_context": [float(v) for v in last.kl_to_star],
            "final_winrate_vs_init": last.mean_winrate_vs_init,
            "initial_exploitability": recs[0].mean_exploitability,
            "final_exploitability": last.mean_exploitability,
            "final_entropy": float(np.mean(last.entropy)),
            "min_slack": float(slack.min()) if slack.size else None,
            "mean_slack": float(slack.mean()) if slack.size else None,
            "max_slack": float(slack.max()) if slack.size else None,
            "c": c,
            "max_kl_to_tilde": float(masked.max()) if np.isfinite(masked).any() else None,
            "kl_decreasing_steps": int(np.sum(diffs < 0)),
            "kl_increasing_steps": int(np.sum(diffs > 0)),
            "kl_weakly_monotone": bool(np.all(diffs <= 1e-12)),
            "duplicate_skips": sum(f.count("dup") for r in steps for f in r.flags),
        }
    if traj.constant_gamma is not None:
        hb = horizon_bound_check(traj, bp)
        summary["horizon_bound"] = hb
    else:
        summary["horizon_bound"] = None
    if traj.error:
        summary["error"] = traj.error
    traj.summary = summary
    return summary
