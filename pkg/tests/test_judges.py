import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lana.game import ContextGame, RngStream, point_mass, random_game, rps_matrix, uniform
from lana.judges import (
    MAX_REDRAWS,
    Construction,
    JudgeKind,
    JudgeMode,
    JudgeVerdict,
    build_improved_opponent,
    judge,
    sample_pair,
    smoothed_preferred,
)
from lana.nash import solve_nash

RPS = ContextGame("x0", rps_matrix())
ROCK, PAPER, SCISSORS = 0, 1, 2


def gen(seed=0, stream=0):
    return RngStream(seed, stream).generator()


def test_point_mass_gives_duplicate_signal():
    assert sample_pair(point_mass(4, 2), gen()) is None


def test_pair_sampling_is_reproducible():
    a = [sample_pair(uniform(2), g) for g in [gen(5)] for _ in range(10)]
    b = [sample_pair(uniform(2), g) for g in [gen(5)] for _ in range(10)]
    assert a == b
    assert all(p is not None and p[0] != p[1] for p in a)


def test_pair_frequencies_match_exact_probabilities():
    n, N = 10, 100_000
    g = gen(1)
    counts = {}
    for _ in range(N):
        y, y2 = sample_pair(uniform(n), g)
        key = (min(y, y2), max(y, y2))
        counts[key] = counts.get(key, 0) + 1
    # pi x pi conditioned on distinct: every unordered pair has mass 2/(n^2 - n)
    p = 2.0 / (n * n - n)
    sigma = np.sqrt(N * p * (1 - p))
    for pair in itertools.combinations(range(n), 2):
        assert abs(counts.get(pair, 0) - N * p) <= 4 * sigma
    chi2 = sum((counts.get(pair, 0) - N * p) ** 2 / (N * p) for pair in itertools.combinations(range(n), 2))
    assert chi2 < 80  # 44 dof; the 0.999 quantile is about 78.7


def test_duplicate_signal_probability():
    # two-point policy (0.99, 0.01): every attempt collides with prob 0.99^2 + 0.01^2
    pi = np.array([0.99, 0.01])
    g = gen(2)
    N = 20_000
    dup = sum(sample_pair(pi, g) is None for _ in range(N))
    expect = (0.99**2 + 0.01**2) ** (1 + MAX_REDRAWS)
    assert abs(dup / N - expect) <= 4 * np.sqrt(expect * (1 - expect) / N)


def test_ground_truth_deterministic():
    v = judge(JudgeMode(JudgeKind.GROUND_TRUTH_DETERMINISTIC), RPS, None, ROCK, SCISSORS, gen())
    assert v.preferred == ROCK and v.rejected == SCISSORS and not v.tie


def test_deterministic_tie_prefers_first():
    ctx = ContextGame("x", np.full((3, 3), 0.5))
    v = judge(JudgeMode(), ctx, None, 2, 0, gen())
    assert v.tie and v.preferred == 2


def test_self_judge_uses_opponent_scores():
    ctx = ContextGame("x", np.full((2, 2), 0.5))
    v = judge(JudgeMode(JudgeKind.SELF_JUDGE), ctx, np.array([0.9, 0.1]), 0, 1, gen())
    assert v.preferred == 0
    v = judge(JudgeMode(JudgeKind.SELF_JUDGE), ctx, np.array([0.9, 0.1]), 1, 0, gen())
    assert v.preferred == 0


def test_expert_judge_uses_equilibrium():
    ctx = random_game(RngStream(3), 4, "condorcet")[0]
    star = solve_nash(ctx).pi_star
    w = int(np.argmax(star))
    other = (w + 1) % 4
    v = judge(JudgeMode(JudgeKind.EXPERT), ctx, None, other, w, gen(), expert=star)
    assert v.preferred == w
    with pytest.raises(ValueError):
        judge(JudgeMode(JudgeKind.EXPERT), ctx, None, other, w, gen())


def test_sampled_judge_frequency():
    P = np.array([[0.5, 0.7], [0.3, 0.5]])
    ctx = ContextGame("x", P)
    g = gen(4)
    N = 100_000
    wins = sum(judge(JudgeMode(JudgeKind.GROUND_TRUTH_SAMPLED), ctx, None, 0, 1, g).preferred == 0 for _ in range(N))
    assert abs(wins / N - 0.7) <= 0.01


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.3])
def test_noise_flip_rate(eps):
    g = gen(6)
    N = 100_000
    flips = 0
    for _ in range(N):
        v = judge(JudgeMode(JudgeKind.GROUND_TRUTH_DETERMINISTIC, eps), RPS, None, ROCK, SCISSORS, g)
        flips += v.flipped_by_noise
        assert (v.preferred == SCISSORS) == v.flipped_by_noise
    assert abs(flips / N - eps) <= 0.01


def test_equal_candidates_rejected():
    with pytest.raises(ValueError):
        judge(JudgeMode(), RPS, None, 1, 1, gen())


def test_noise_must_be_below_half():
    with pytest.raises(ValueError):
        JudgeMode(noise_epsilon=0.5)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=3, max_size=8, unique=True),
    st.sampled_from([np.log, np.sqrt, lambda v: v**3, lambda v: 5 * v - 2]),
    st.data(),
)
def test_verdict_invariant_under_increasing_transform(scores, f, data):
    scores = np.array(scores)
    n = len(scores)
    y, y2 = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    ctx = ContextGame("x", np.full((n, n), 0.5))
    for kind in (JudgeKind.SELF_JUDGE, JudgeKind.EXPERT):
        a = judge(JudgeMode(kind), ctx, scores, y, y2, gen(), expert=scores)
        b = judge(JudgeMode(kind), ctx, f(scores), y, y2, gen(), expert=f(scores))
        assert a.preferred == b.preferred


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8), st.data())
def test_swap_invariance_without_ties(seed, n, data):
    ctx = random_game(RngStream(seed), n, "uniform")[0]
    pi = np.random.default_rng(seed).dirichlet(np.ones(n))
    y, y2 = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    for kind in (JudgeKind.GROUND_TRUTH_DETERMINISTIC, JudgeKind.SELF_JUDGE, JudgeKind.EXPERT):
        a = judge(JudgeMode(kind), ctx, pi, y, y2, gen(), expert=pi)
        b = judge(JudgeMode(kind), ctx, pi, y2, y, gen(), expert=pi)
        if not (a.tie or b.tie):
            assert a.preferred == b.preferred


def test_smoothed_preferred_example():
    assert np.allclose(smoothed_preferred(2, 0, 0.01), [0.995, 0.005], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.floats(1e-6, 1.0), st.data())
def test_smoothed_preferred_min_entry(n, mu, data):
    k = data.draw(st.integers(0, n - 1))
    p = smoothed_preferred(n, k, mu)
    assert p.min() >= mu / n * (1 - 1e-12)
    assert abs(p.sum() - 1) <= 1e-12


def test_smoothed_preferred_zero_mu_is_floored():
    p = smoothed_preferred(3, 1, 0.0)
    assert p.min() >= 1e-9 and p.argmax() == 1


def test_best_response_against_rock_is_paper():
    rows = [rps_matrix()[a] @ point_mass(3, ROCK) for a in range(3)]  # brute-force argmax
    assert int(np.argmax(rows)) == PAPER
    br = build_improved_opponent(Construction.BEST_RESPONSE, 3, P=rps_matrix(), pi=point_mass(3, ROCK))
    assert int(np.argmax(br)) == PAPER
    assert br.min() >= 1e-9 and br[PAPER] == pytest.approx(1.0)


def test_expert_policy_carries_equilibrium():
    star = solve_nash(rps_matrix()).pi_star
    assert np.allclose(build_improved_opponent("expert_policy", 3, pi_star=star), uniform(3))


def test_smoothed_needs_verdict():
    with pytest.raises(ValueError):
        build_improved_opponent("smoothed_preferred", 3)
    v = JudgeVerdict("x", 0, 2, 2, 0, JudgeKind.SELF_JUDGE)
    assert build_improved_opponent("smoothed_preferred", 3, verdict=v, mu=0.03)[2] == pytest.approx(0.98)
