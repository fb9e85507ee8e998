"""Preference games, policies and the elementary quantities computed on them.

A preference game is a list of independent contexts. Each context holds a
square matrix ``P`` where ``P[a, b]`` is the probability that response ``a``
is preferred over response ``b``. Policies are stored as one probability
vector per context, in the same order as ``PreferenceGame.contexts``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FLOOR = 1e-9

# per-purpose stream ids for RngStream
STREAM_GAME = 0
STREAM_INIT = 1
STREAM_CONTEXT = 2
STREAM_PAIR = 3
STREAM_JUDGE = 4


class InfiniteDivergenceError(ValueError):
    """Raised when a KL divergence would be infinite."""


class SupportError(ValueError):
    """Raised when a policy without full support is passed to a log map."""


@dataclass(frozen=True)
class ContextGame:
    context_id: str
    P: np.ndarray
    responses: tuple = ()

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        if not self.responses:
            object.__setattr__(self, "responses", tuple(f"y{i}" for i in range(P.shape[0])))
        else:
            object.__setattr__(self, "responses", tuple(str(r) for r in self.responses))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def payoff(self) -> np.ndarray:
        """Antisymmetric zero-sum payoff ``A = P - 1/2``."""
        return self.P - 0.5


@dataclass(frozen=True)
class PreferenceGame:
    contexts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "contexts", tuple(self.contexts))

    def __len__(self):
        return len(self.contexts)

    def __getitem__(self, k) -> ContextGame:
        return self.contexts[k]

    def index(self, context_id: str) -> int:
        for k, ctx in enumerate(self.contexts):
            if ctx.context_id == context_id:
                return k
        raise KeyError(context_id)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "contexts": [
                {
                    "context_id": c.context_id,
                    "responses": list(c.responses),
                    "P": [[float(v) for v in row] for row in c.P],
                }
                for c in self.contexts
            ]
        }

    def to_json(self) -> str:
        # float repr is shortest round-trip, so 17 significant digits survive
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "PreferenceGame":
        contexts = []
        for k, c in enumerate(doc["contexts"]):
            contexts.append(
                ContextGame(
                    context_id=str(c.get("context_id", f"x{k}")),
                    P=np.asarray(c["P"], dtype=float),
                    responses=tuple(c.get("responses", ())),
                )
            )
        return cls(tuple(contexts))

    @classmethod
    def from_json(cls, text: str) -> "PreferenceGame":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "PreferenceGame":
        return cls.from_json(Path(path).read_text())


def single_context(P, context_id: str = "x0", responses=()) -> PreferenceGame:
    return PreferenceGame((ContextGame(context_id, np.asarray(P, dtype=float), tuple(responses)),))


def rps_matrix() -> np.ndarray:
    """Rock-paper-scissors preference matrix (rock, paper, scissors)."""
    return np.array([
        [0.5, 0.0, 1.0],
        [1.0, 0.5, 0.0],
        [0.0, 1.0, 0.5],
    ])


# validation ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    context_id: str
    kind: str  # "shape" | "range" | "complement" | "diagonal" | "size"
    indices: tuple
    magnitude: float

    def __str__(self):
        return f"{self.context_id}: {self.kind} at {self.indices} (magnitude {self.magnitude:.3g})"


def validate_game(g: PreferenceGame, atol: float = 1e-12) -> list[Violation]:
    """Return every broken invariant of ``g``; an empty list means valid.

    Complement violations are reported once per unordered pair ``a < b``.
    """
    out: list[Violation] = []
    if len(g.contexts) == 0:
        out.append(Violation("<game>", "size", (), 0.0))
    for c in g.contexts:
        P = c.P
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            out.append(Violation(c.context_id, "shape", tuple(P.shape), float("nan")))
            continue
        n = P.shape[0]
        if n < 2:
            out.append(Violation(c.context_id, "size", (n,), float(2 - n)))
        if len(c.responses) != n:
            out.append(Violation(c.context_id, "shape", (len(c.responses), n), float("nan")))
        bad = ~np.isfinite(P) | (P < 0) | (P > 1)
        for a, b in zip(*np.nonzero(bad)):
            v = P[a, b]
            mag = float("inf") if not np.isfinite(v) else float(max(-v, v - 1))
            out.append(Violation(c.context_id, "range", (int(a), int(b)), mag))
        for a in range(n):
            d = abs(P[a, a] - 0.5)
            if not d <= atol:
                out.append(Violation(c.context_id, "diagonal", (a, a), float(d)))
            for b in range(a + 1, n):
                d = abs(P[a, b] + P[b, a] - 1.0)
                if not d <= atol:
                    out.append(Violation(c.context_id, "complement", (a, b), float(d)))
    return out


# random numbers ------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Counter-based generator keyed by ``(seed, stream_id)``.

    Philox is counter-based, so a given key always yields the same sequence
    on every platform, and separate stream ids never share draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()


def random_context_matrix(gen: np.random.Generator, n: int, kind: str = "uniform") -> tuple[np.ndarray, int | None]:
    """Draw one preference matrix. Returns ``(P, designated_winner)``."""
    if n < 2:
        raise ValueError(f"random_game needs n >= 2, got {n}")
    if kind not in ("uniform", "condorcet", "cyclic"):
        raise ValueError(f"unknown game kind {kind!r}")
    iu = np.triu_indices(n, 1)
    upper = gen.random(len(iu[0]))
    P = np.full((n, n), 0.5)
    P[iu] = upper
    winner = None
    if kind == "condorcet":
        winner = int(gen.integers(n))
        # 1 - U with U in [0, 1) lies in (0, 1], keeping strict preference
        strong = 0.5 + 0.5 * (1.0 - gen.random(n))
        for b in range(n):
            if b == winner:
                continue
            a, c = (winner, b) if winner < b else (b, winner)
            P[a, c] = strong[b] if a == winner else 1.0 - strong[b]
    elif kind == "cyclic" and n >= 3:
        # i beats i+1 (mod n), so every response loses to its predecessor
        strong = 0.5 + 0.5 * (1.0 - gen.random(n))
        for i in range(n):
            j = (i + 1) % n
            a, c = (i, j) if i < j else (j, i)
            P[a, c] = strong[i] if a == i else 1.0 - strong[i]
    P[(iu[1], iu[0])] = 1.0 - P[iu]
    return P, winner


def random_game(rng, n: int, kind: str = "uniform", contexts: int = 1) -> PreferenceGame:
    """Generate a valid random preference game.

    Args:
        rng: an ``RngStream``, a numpy ``Generator`` or an integer seed.
        n: responses per context, at least 2.
        kind: ``"uniform"`` draws the upper triangle i.i.d. on [0, 1];
            ``"condorcet"`` additionally plants a response that beats all
            others with probability > 1/2; ``"cyclic"`` plants a preference
            cycle so that no Condorcet winner exists when ``n >= 3``.
        contexts: number of independent contexts.
    """
    if contexts < 1:
        raise ValueError("contexts must be >= 1")
    gen = _as_generator(rng)
    out = []
    for k in range(contexts):
        P, _ = random_context_matrix(gen, n, kind)
        out.append(ContextGame(f"x{k}", P))
    return PreferenceGame(tuple(out))


def condorcet_winner(P: np.ndarray) -> int | None:
    n = P.shape[0]
    for a in range(n):
        if all(P[a, b] > 0.5 for b in range(n) if b != a):
            return a
    return None


# policies ------------------------------------------------------------------


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def point_mass(n: int, k: int) -> np.ndarray:
    p = np.zeros(n)
    p[k] = 1.0
    return p


def apply_floor(p, eps: float = FLOOR) -> np.ndarray:
    """Raise entries below ``eps`` to ``eps`` and rescale the rest.

    The result sums to one and has every entry >= eps. Vectors that already
    satisfy the floor are only renormalized.
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    if eps * n > 1:
        raise ValueError(f"floor {eps} infeasible for n={n}")
    q = p / p.sum()
    if eps <= 0 or q.min() >= eps:
        return q
    low = q < eps
    for _ in range(n):
        free = 1.0 - eps * low.sum()
        rest = q[~low].sum()
        q = np.where(low, eps, q * (free / rest))
        new_low = low | (q < eps)
        if np.array_equal(new_low, low):
            break
        low = new_low
    return q


def is_policy(p, eps: float = 0.0, atol: float = 1e-9) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(np.all(np.isfinite(p)) and abs(p.sum() - 1.0) <= atol and p.min() >= eps * (1 - 1e-12) and p.min() >= 0)


def softmax(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    z = np.exp(theta - theta.max())
    return z / z.sum()


@dataclass
class LogitPolicy:
    """Unnormalized scores per context; the policy is ``softmax(theta)``."""

    thetas: list

    @classmethod
    def from_policy(cls, policy: Sequence[np.ndarray]) -> "LogitPolicy":
        return cls([np.log(np.asarray(p, dtype=float)) for p in policy])

    def policy(self, eps: float = FLOOR) -> list[np.ndarray]:
        return [apply_floor(softmax(t), eps) for t in self.thetas]

    def copy(self) -> "LogitPolicy":
        return LogitPolicy([t.copy() for t in self.thetas])


# information and win rates -------------------------------------------------


def kl_divergence(p, q, floor: bool = False, eps: float = FLOOR) -> float:
    """KL(p || q) in nats with ``0 log 0 = 0``.

    Raises ``InfiniteDivergenceError`` when q vanishes where p does not,
    unless ``floor`` is set, in which case q is floored first.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    if floor:
        q = apply_floor(q, eps)
    m = p > 0
    if np.any(q[m] <= 0):
        raise InfiniteDivergenceError("q has zero mass where p is positive")
    return max(float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m])))), 0.0)


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    m = p > 0
    return float(-np.sum(p[m] * np.log(p[m])))


def _check_policies(g: PreferenceGame, a, b):
    if len(a) != len(g.contexts) or len(b) != len(g.contexts):
        raise ValueError("policy context count does not match game")
    for c, pa, pb in zip(g.contexts, a, b):
        if len(pa) != c.n or len(pb) != c.n:
            raise ValueError(f"policy length mismatch on context {c.context_id}")


def context_winrate(P: np.ndarray, a, b) -> float:
    return float(np.asarray(a) @ P @ np.asarray(b))


def expected_winrate(g: PreferenceGame, a: Sequence, b: Sequence) -> float:
    """Mean over contexts of ``sum a(y) b(y') P[y, y']``."""
    _check_policies(g, a, b)
    return float(np.mean([context_winrate(c.P, pa, pb) for c, pa, pb in zip(g.contexts, a, b)]))


def uniform_policy(g: PreferenceGame) -> list[np.ndarray]:
    return [uniform(c.n) for c in g.contexts]
