"""Mirror-space updates against an improved opponent, and the two-player loop.

The exact update moves the log-policy by ``delta = gamma * log(pi_tilde / pi_t)``
and normalizes, i.e. ``pi_{t+1} ∝ pi_t^(1-gamma) * pi_tilde^gamma``. The SGD
modes instead take gradient steps on softmax logits with the per-sample
LANA loss, either as literally written (``sgd_loss_paper``) or with the
preferred/rejected roles swapped so that descent raises the preferred
response (``sgd_loss_corrected``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import BoundParams, StepRecord, Trajectory, lemma_step_check
from .config import RunConfig
from .game import (
    FLOOR,
    STREAM_CONTEXT,
    STREAM_INIT,
    STREAM_JUDGE,
    STREAM_PAIR,
    PreferenceGame,
    RngStream,
    SupportError,
    apply_floor,
    context_winrate,
    entropy,
    kl_divergence,
    softmax,
)
from .judges import (
    Construction,
    JudgeMode,
    JudgeVerdict,
    build_improved_opponent,
    judge,
    sample_pair,
)
from .nash import NashSolution, exploitability

EXACT_MIRROR = "exact_mirror"
SGD_LOSS_PAPER = "sgd_loss_paper"
SGD_LOSS_CORRECTED = "sgd_loss_corrected"


@dataclass(frozen=True)
class MirrorStep:
    delta: np.ndarray
    gamma: float
    dual_point: np.ndarray
    q_rewards: np.ndarray

    @property
    def delta_inf(self) -> float:
        return float(np.max(np.abs(self.delta)))


def mirror_map(p) -> np.ndarray:
    """Gradient of negative entropy, ``log p``. Needs full support."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise SupportError("mirror map needs full support; apply a floor first")
    return np.log(p)


def adaptive_delta(pi_t, pi_tilde, gamma: float, literal_eq2: bool = False) -> MirrorStep:
    """Dual-space step towards the improved opponent.

    By default ``delta = gamma * log(pi_tilde / pi_t)``. With ``literal_eq2``
    the reward ``Q = log(pi_t / pi_tilde) / gamma`` is used as written and
    ``delta = gamma * Q`` points away from ``pi_tilde`` with no gamma scaling.
    """
    log_t = mirror_map(pi_t)
    log_tilde = mirror_map(pi_tilde)
    if literal_eq2:
        q = (log_t - log_tilde) / gamma
    else:
        q = log_tilde - log_t
    delta = gamma * q
    return MirrorStep(delta, float(gamma), log_t + delta, q)


def maio_update(pi_t, step: MirrorStep, eps: float = FLOOR) -> np.ndarray:
    """KL projection of the dual point back onto the (floored) simplex."""
    z = mirror_map(pi_t) + step.delta
    w = np.exp(z - z.max())
    return apply_floor(w / w.sum(), eps)


def geometric_mixture(pi_t, pi_tilde, gamma: float) -> np.ndarray:
    """``normalize(pi_t^(1-gamma) * pi_tilde^gamma)`` computed directly."""
    w = np.power(pi_t, 1.0 - gamma) * np.power(pi_tilde, gamma)
    return w / w.sum()


# SGD losses on logits --------------------------------------------------------


def lana_loss(theta, opponent, preferred: int, rejected: int, mode: str) -> float:
    """Per-sample loss of one player's logits ``theta`` on one verdict.

    ``sgd_loss_paper``: ``log pi_opp(preferred) - log pi(rejected)``.
    ``sgd_loss_corrected``: ``log pi_opp(rejected) - log pi(preferred)``.
    """
    theta = np.asarray(theta, dtype=float)
    logp = theta - theta.max()
    logp = logp - np.log(np.sum(np.exp(logp)))
    if mode == SGD_LOSS_PAPER:
        return float(np.log(opponent[preferred]) - logp[rejected])
    if mode == SGD_LOSS_CORRECTED:
        return float(np.log(opponent[rejected]) - logp[preferred])
    raise ValueError(f"not an SGD mode: {mode!r}")


def lana_loss_grad(theta, preferred: int, rejected: int, mode: str) -> np.ndarray:
    """Gradient of ``lana_loss`` in ``theta``; the opponent term is constant."""
    target = rejected if mode == SGD_LOSS_PAPER else preferred
    if mode not in (SGD_LOSS_PAPER, SGD_LOSS_CORRECTED):
        raise ValueError(f"not an SGD mode: {mode!r}")
    g = softmax(theta)
    g[target] -= 1.0
    return g


def lana_sgd_step(theta, opponent, verdicts, mode: str, lr: float) -> tuple[np.ndarray, float]:
    """One SGD step on a batch of verdicts for a single context.

    Returns the new logits and the mean loss before the step.
    """
    if isinstance(verdicts, JudgeVerdict):
        verdicts = [verdicts]
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    loss = 0.0
    for v in verdicts:
        loss += lana_loss(theta, opponent, v.preferred, v.rejected, mode)
        grad += lana_loss_grad(theta, v.preferred, v.rejected, mode)
    m = len(verdicts)
    return theta - lr * grad / m, loss / m


# two-player loop ---------------------------------------------------------------


@dataclass
class LanaState:
    """Both players' parameters; ``policies[i][k]`` is player i on context k.

    In SGD modes ``thetas`` carries the logits and ``policies`` their floored
    softmax.
    """

    policies: list
    thetas: list | None = None

    def copy(self) -> "LanaState":
        return LanaState(
            [[p.copy() for p in pl] for pl in self.policies],
            None if self.thetas is None else [[t.copy() for t in pl] for pl in self.thetas],
        )


@dataclass
class _StepOutcome:
    updated: bool = False
    pi_tilde: np.ndarray | None = None
    delta_qnorm: float = 0.0
    loss: float = float("nan")
    slack: float = 0.0
    flags: tuple = ()


class _Streams:
    def __init__(self, seed: int):
        self.context = RngStream(seed, STREAM_CONTEXT).generator()
        self.pair = [RngStream(seed, STREAM_PAIR * 16 + i).generator() for i in range(2)]
        self.judge = [RngStream(seed, STREAM_JUDGE * 16 + i).generator() for i in range(2)]


def initial_state(g: PreferenceGame, cfg: RunConfig, seed: int) -> LanaState:
    gen = RngStream(seed, STREAM_INIT).generator()
    players = []
    for i in range(2):
        if i == 1 and cfg.shared_init:
            players.append([p.copy() for p in players[0]])
            continue
        if cfg.init == "uniform":
            pol = [np.full(c.n, 1.0 / c.n) for c in g.contexts]
        else:
            pol = [gen.dirichlet(np.ones(c.n)) for c in g.contexts]
        players.append([apply_floor(p, cfg.floor) for p in pol])
    thetas = None
    if cfg.update_mode != EXACT_MIRROR:
        thetas = [[np.log(p) for p in pl] for pl in players]
    return LanaState(players, thetas)


def _exact_player_step(i, k, state, opp_policy, g, cfg, gamma, pi_star, streams, bp):
    pi_t = state.policies[i][k]
    ctx = g.contexts[k]
    construction = Construction(cfg.construction)
    verdict = None
    flags = []
    if construction is Construction.SMOOTHED_PREFERRED:
        pair = sample_pair(pi_t, streams.pair[i])
        if pair is None:
            return pi_t, _StepOutcome(flags=("dup",))
        mode = JudgeMode(cfg.judge, cfg.noise_epsilon)
        verdict = judge(mode, ctx, opp_policy, *pair, streams.judge[i], expert=pi_star)
        flags += ["tie"] * verdict.tie + ["noise"] * verdict.flipped_by_noise
    pi_tilde = build_improved_opponent(
        construction, ctx.n, verdict=verdict, P=ctx.P, pi=pi_t, pi_star=pi_star, mu=cfg.mu, eps=cfg.floor,
    )
    step = adaptive_delta(pi_t, pi_tilde, gamma, cfg.delta_literal_eq2)
    pi_next = maio_update(pi_t, step, cfg.floor)
    slack = lemma_step_check(pi_star, pi_t, pi_next, pi_tilde, gamma, bp)
    # mirror-space surrogate: expected log(pi_tilde / pi_t) under the new iterate
    loss = float(pi_next @ (np.log(pi_tilde) - np.log(pi_t)))
    return pi_next, _StepOutcome(True, pi_tilde, bp.norm(step.delta), loss, slack, tuple(flags))


def _sgd_player_step(i, k, state, opp_policy, g, cfg, pi_star, streams, bp):
    theta = state.thetas[i][k]
    pi_t = state.policies[i][k]
    ctx = g.contexts[k]
    mode = JudgeMode(cfg.judge, cfg.noise_epsilon)
    verdicts = []
    flags = []
    for _ in range(cfg.batch):
        pair = sample_pair(pi_t, streams.pair[i])
        if pair is None:
            flags.append("dup")
            continue
        v = judge(mode, ctx, opp_policy, *pair, streams.judge[i], expert=pi_star)
        flags += ["tie"] * v.tie + ["noise"] * v.flipped_by_noise
        verdicts.append(v)
    if not verdicts:
        return theta, _StepOutcome(flags=tuple(flags))
    new_theta, loss = lana_sgd_step(theta, opp_policy, verdicts, cfg.update_mode, cfg.lr)
    # the sample treated as the improved opponent, logged for comparison with
    # the exact mode
    pi_tilde = build_improved_opponent(Construction.SMOOTHED_PREFERRED, ctx.n, verdict=verdicts[-1], mu=cfg.mu, eps=cfg.floor)
    return new_theta, _StepOutcome(True, pi_tilde, bp.norm(new_theta - theta), loss, float("nan"), tuple(flags))


def lana_step(state: LanaState, g: PreferenceGame, cfg: RunConfig, gamma: float, k: int,
              pi_star: list, streams: _Streams, bp: BoundParams) -> tuple[LanaState, list]:
    """Advance both players on context ``k``.

    Players update simultaneously against the opponent's pre-step policy
    unless ``cfg.sequential`` is set, in which case player 2 judges with
    player 1's fresh policy. Returns the new state and one outcome per player.
    """
    new = state.copy()
    outcomes = []
    for i in range(2):
        source = new if cfg.sequential else state
        opp_policy = source.policies[1 - i][k]
        if cfg.update_mode == EXACT_MIRROR:
            pi_next, out = _exact_player_step(i, k, state, opp_policy, g, cfg, gamma, pi_star[k], streams, bp)
            new.policies[i][k] = pi_next
        else:
            theta_next, out = _sgd_player_step(i, k, state, opp_policy, g, cfg, pi_star[k], streams, bp)
            new.thetas[i][k] = theta_next
            new.policies[i][k] = apply_floor(softmax(theta_next), cfg.floor)
        outcomes.append(out)
    return new, outcomes


def lana_exact_step(state: LanaState, g: PreferenceGame, cfg: RunConfig, gamma: float, k: int,
                    pi_star: list, seed: int = 0, streams: _Streams | None = None,
                    bp: BoundParams = BoundParams()) -> tuple[LanaState, list]:
    """Exact mirror step for both players on context ``k``."""
    if cfg.update_mode != EXACT_MIRROR:
        cfg = cfg.replace(update_mode=EXACT_MIRROR)
    return lana_step(state, g, cfg, gamma, k, pi_star, streams or _Streams(seed), bp)


def _record(t, player, gamma, g, state, init, pi_star, outcomes_by_ctx) -> StepRecord:
    K = len(g.contexts)
    pols = state.policies[player]
    kl_star = np.array([kl_divergence(pi_star[k], pols[k]) for k in range(K)])
    kl_tilde = np.full(K, np.nan)
    dnorm = np.zeros(K)
    loss = np.full(K, np.nan)
    slack = np.zeros(K)
    updated = np.zeros(K, dtype=bool)
    flags = [""] * K
    for k, out in outcomes_by_ctx.items():
        updated[k] = out.updated
        flags[k] = "|".join(out.flags)
        if out.updated:
            kl_tilde[k] = kl_divergence(pi_star[k], out.pi_tilde)
            dnorm[k] = out.delta_qnorm
            loss[k] = out.loss
            slack[k] = out.slack
    return StepRecord(
        t=t, player=player + 1, gamma=gamma,
        kl_to_star=kl_star,
        kl_to_tilde=kl_tilde,
        delta_qnorm=dnorm,
        winrate_vs_init=np.array([context_winrate(c.P, pols[k], init[k]) for k, c in enumerate(g.contexts)]),
        exploitability=np.array([exploitability(c, pols[k]) for k, c in enumerate(g.contexts)]),
        loss=loss,
        lemma_slack=slack,
        entropy=np.array([entropy(p) for p in pols]),
        updated=updated,
        flags=flags,
    )


def run_dynamics(cfg: RunConfig, g: PreferenceGame, nash: NashSolution, seed: int) -> Trajectory:
    """Run ``cfg.T`` steps of the configured mode for both players.

    Each step draws one context uniformly, then updates both players on it.
    A component error stops the run; the trajectory recorded so far is
    returned with ``error`` set.
    """
    bp = BoundParams(cfg.sigma, cfg.p_norm)
    pi_star = nash.policy
    schedule = cfg.step_schedule
    streams = _Streams(seed)
    state = initial_state(g, cfg, seed)
    init = [[p.copy() for p in pl] for pl in state.policies]
    traj = Trajectory(
        config={**cfg.to_dict(), "seed": seed},
        pi_star=[p.copy() for p in pi_star],
        initial_policies=init,
        context_ids=[c.context_id for c in g.contexts],
        constant_gamma=schedule.constant,
    )
    for i in range(2):
        traj.records.append(_record(0, i, float("nan"), g, state, init[i], pi_star, {}))
    try:
        for t in range(1, cfg.T + 1):
            gamma = schedule(t)
            k = int(streams.context.integers(len(g.contexts)))
            state, outcomes = lana_step(state, g, cfg, gamma, k, pi_star, streams, bp)
            recs = [_record(t, i, gamma, g, state, init[i], pi_star, {k: outcomes[i]}) for i in range(2)]
            traj.records.extend(recs)
            if np.mean([r.mean_kl_to_star for r in recs]) < cfg.convergence_tol:
                break
    except Exception as e:  # noqa: BLE001 - partial trajectory is part of the contract
        traj.error = f"{type(e).__name__}: {e}"
    traj.final_policies = [[p.copy() for p in pl] for pl in state.policies]
    return traj
