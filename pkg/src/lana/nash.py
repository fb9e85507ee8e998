"""Symmetric Nash equilibria of context preference games.

Every context defines a symmetric zero-sum game with antisymmetric payoff
``A = P - 1/2`` whose value is zero. ``solve_nash`` runs self-play
multiplicative weights with uniform iterate averaging and periodically
polishes the average on its apparent support, which turns the slow
O(1/sqrt(t)) averaged rate into an exact certificate once the support is
identified. ``brute_force_nash`` enumerates supports and is used as an
independent oracle on small games.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .game import ContextGame, PreferenceGame, uniform


class NashConvergenceError(RuntimeError):
    """Iteration budget exhausted before the tolerance was met."""

    def __init__(self, message, best, exploitability, iterations):
        super().__init__(message)
        self.best = best
        self.exploitability = exploitability
        self.iterations = iterations


@dataclass(frozen=True)
class ContextNash:
    context_id: str
    pi_star: np.ndarray
    exploitability: float
    iterations: int
    method: str  # "averaged-multiplicative-weights" | "linear-program" | "brute-force"

    def to_dict(self):
        return {
            "context_id": self.context_id,
            "pi_star": [float(v) for v in self.pi_star],
            "exploitability": float(self.exploitability),
            "iterations": int(self.iterations),
            "method": self.method,
        }


@dataclass(frozen=True)
class NashSolution:
    contexts: tuple

    @property
    def policy(self) -> list[np.ndarray]:
        return [c.pi_star for c in self.contexts]

    @property
    def exploitability(self) -> float:
        return max(c.exploitability for c in self.contexts)

    def to_dict(self):
        return {"contexts": [c.to_dict() for c in self.contexts], "max_exploitability": self.exploitability}


def _payoff(g_ctx) -> np.ndarray:
    if isinstance(g_ctx, ContextGame):
        return g_ctx.payoff
    return np.asarray(g_ctx, dtype=float) - 0.5


def _exploit(A: np.ndarray, p: np.ndarray) -> float:
    return max(float(np.max(A @ p)), 0.0)


def exploitability(g_ctx, p) -> float:
    """Best pure-response gain ``max_a sum_y' p(y') P[a, y'] - 1/2``.

    ``g_ctx`` is a ``ContextGame`` or a raw preference matrix.
    """
    return _exploit(_payoff(g_ctx), np.asarray(p, dtype=float))


def _solve_on_support(A: np.ndarray, support) -> np.ndarray | None:
    """Equalizing strategy on ``support``: ``A[S, S] x = 0``, ``sum x = 1``."""
    S = np.asarray(sorted(support))
    k = len(S)
    M = np.vstack([A[np.ix_(S, S)], np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if not np.all(np.isfinite(x)):
        return None
    p = np.zeros(A.shape[0])
    p[S] = x
    return p


def _reduce(A: np.ndarray, support, gains: np.ndarray) -> np.ndarray | None:
    """Shrink ``support`` until its equalizer is consistent and nonnegative.

    An inconsistent system (for an antisymmetric block, typically an even
    support) loses its lowest-gain member; a negative equalizer loses its
    most negative coordinate.
    """
    S = sorted(support)
    while S:
        x = _solve_on_support(A, S)
        if x is None:
            return None
        resid = np.abs(A[np.ix_(S, S)] @ x[S]).max()
        if resid > 1e-10 or abs(x[S].sum() - 1.0) > 1e-9:
            S.remove(min(S, key=lambda i: gains[i]))
            continue
        if x.min() < -1e-14:
            S.remove(int(np.argmin(x)))
            continue
        x = np.clip(x, 0.0, None)
        return x / x.sum()
    return None


def _polish(A: np.ndarray, avg: np.ndarray, tol: float) -> np.ndarray | None:
    """Certify an equalizer on a support suggested by the averaged iterate.

    Equilibrium responses earn the top gains against ``avg``. Each pool of
    the ``m`` best responses is reduced to a consistent nonnegative
    equalizer; a still-profitable outside response is added back and the
    pool reduced again.
    """
    n = A.shape[0]
    gains = A @ avg
    order = np.argsort(-gains, kind="stable")
    best, best_e = None, np.inf
    seen = set()
    for m in range(1, n + 1):
        S = set(order[:m].tolist())
        for _ in range(n):
            key = frozenset(S)
            if key in seen:
                break
            seen.add(key)
            x = _reduce(A, S, gains)
            if x is None:
                break
            g = A @ x
            e = max(float(g.max()), 0.0)
            if e < best_e:
                best, best_e = x, e
            if e <= tol:
                return x
            S = set(np.flatnonzero(x > 0).tolist()) | {int(np.argmax(g))}
    return best


def _indifferent(A: np.ndarray) -> bool:
    return bool(np.all(A == 0.0))


def _lp_equilibrium(A: np.ndarray) -> np.ndarray | None:
    """Feasibility LP ``A x <= 0, sum x = 1, x >= 0`` (the game value is 0)."""
    n = A.shape[0]
    res = linprog(
        np.zeros(n), A_ub=A, b_ub=np.zeros(n), A_eq=np.ones((1, n)), b_eq=[1.0],
        bounds=[(0, None)] * n, method="highs",
    )
    if res.status != 0:
        return None
    x = np.clip(res.x, 0.0, None)
    return x / x.sum()


def solve_context(
    g_ctx,
    tol: float = 1e-6,
    max_iter: int = 1_000_000,
    lp_after: int | None = 4096,
    context_id: str = "x0",
) -> ContextNash:
    A = _payoff(g_ctx)
    if isinstance(g_ctx, ContextGame):
        context_id = g_ctx.context_id
    n = A.shape[0]
    if tol <= 0:
        raise ValueError("tol must be positive")
    if _indifferent(A):
        return ContextNash(context_id, uniform(n), 0.0, 0, "averaged-multiplicative-weights")

    logw = np.zeros(n)
    p = uniform(n)
    avg_sum = np.zeros(n)
    # uniform average over the most recent doubling window; forgets the
    # transient and identifies the support sooner than the full average
    window_sum = np.zeros(n)
    best, best_e = p.copy(), _exploit(A, p)
    next_check = 64
    for t in range(1, max_iter + 1):
        avg_sum += p
        window_sum += p
        # self-play: the opponent plays p as well, so each response earns A @ p
        logw += (A @ p) / np.sqrt(t)
        z = np.exp(logw - logw.max())
        p = z / z.sum()
        if t == next_check or t == max_iter:
            next_check *= 2
            for avg in (avg_sum / t, window_sum / window_sum.sum()):
                for cand in (avg, _polish(A, avg, tol)):
                    if cand is None:
                        continue
                    e = _exploit(A, cand)
                    if e < best_e:
                        best, best_e = cand, e
            window_sum[:] = 0.0
            if best_e <= tol:
                return ContextNash(context_id, best, best_e, t, "averaged-multiplicative-weights")
            if lp_after is not None and t >= lp_after:
                x = _lp_equilibrium(A)
                if x is not None:
                    # re-solve on the LP support to clean solver round-off
                    polished = _polish(A, x, tol)
                    if polished is not None and _exploit(A, polished) <= _exploit(A, x):
                        x = polished
                    e = _exploit(A, x)
                    if e <= tol:
                        return ContextNash(context_id, x, e, t, "linear-program")
                lp_after = None
    raise NashConvergenceError(
        f"no {tol:g}-equilibrium after {max_iter} iterations (best {best_e:.3g})",
        best, best_e, max_iter,
    )


def solve_nash(g, tol: float = 1e-6, max_iter: int = 1_000_000, lp_after: int | None = 4096):
    """Equilibrium of one context (``ContextGame`` or matrix) or of a whole game.

    A ``PreferenceGame`` yields a ``NashSolution`` assembled from independent
    per-context solves; anything else yields a single ``ContextNash``.

    Raises:
        NashConvergenceError: ``max_iter`` exhausted; carries the best
            iterate and its exploitability.
    """
    if isinstance(g, PreferenceGame):
        return NashSolution(tuple(solve_context(c, tol, max_iter, lp_after) for c in g.contexts))
    return solve_context(g, tol, max_iter, lp_after)


def brute_force_nash(g_ctx, atol: float = 1e-9, context_id: str = "x0") -> ContextNash:
    """Symmetric equilibrium by enumerating every support (n <= 4).

    The uniform policy is returned whenever it is itself an equilibrium;
    otherwise supports are tried smallest first.
    """
    A = _payoff(g_ctx)
    if isinstance(g_ctx, ContextGame):
        context_id = g_ctx.context_id
    n = A.shape[0]
    if n > 4:
        raise ValueError(f"brute_force_nash supports n <= 4, got {n}")
    u = uniform(n)
    if _exploit(A, u) <= atol:
        return ContextNash(context_id, u, _exploit(A, u), 0, "brute-force")
    tried = 0
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            tried += 1
            x = _solve_on_support(A, S)
            if x is None or x.min() < -atol:
                continue
            x = np.clip(x, 0.0, None)
            if abs(x.sum() - 1.0) > 1e-6:
                continue
            x /= x.sum()
            e = _exploit(A, x)
            if e <= atol:
                return ContextNash(context_id, x, e, tried, "brute-force")
    raise RuntimeError("no symmetric equilibrium found; the game is not a valid preference game")
