import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lana.game import (
    ContextGame,
    InfiniteDivergenceError,
    LogitPolicy,
    PreferenceGame,
    RngStream,
    apply_floor,
    condorcet_winner,
    entropy,
    expected_winrate,
    is_policy,
    kl_divergence,
    point_mass,
    random_game,
    rps_matrix,
    single_context,
    softmax,
    uniform,
    validate_game,
)

ROCK, PAPER, SCISSORS = 0, 1, 2


def test_rps_is_valid():
    assert validate_game(single_context(rps_matrix())) == []


def test_complement_violation_reports_magnitude():
    P = np.array([[0.5, 0.7], [0.4, 0.5]])
    v = validate_game(single_context(P))
    assert len(v) == 1
    assert v[0].kind == "complement"
    assert v[0].indices == (0, 1)
    assert v[0].magnitude == pytest.approx(0.1)


def test_diagonal_violation():
    P = np.array([[0.6, 0.5], [0.5, 0.5]])
    v = validate_game(single_context(P))
    assert [x.kind for x in v] == ["diagonal"]


def test_range_and_size_violations():
    assert any(v.kind == "size" for v in validate_game(single_context([[0.5]])))
    bad = np.array([[0.5, 1.2], [-0.2, 0.5]])
    kinds = {v.kind for v in validate_game(single_context(bad))}
    assert "range" in kinds


@pytest.mark.parametrize("kind", ["uniform", "condorcet", "cyclic"])
@pytest.mark.parametrize("n", [2, 3, 5, 10])
def test_random_game_is_valid(kind, n):
    g = random_game(RngStream(7), n, kind, contexts=3)
    assert validate_game(g) == []
    assert len(g) == 3


def test_condorcet_designated_row_dominates():
    for s in range(30):
        P = random_game(RngStream(s), 5, "condorcet")[0].P
        rows = [a for a in range(5) if all(P[a, b] > 0.5 for b in range(5) if b != a)]
        assert len(rows) == 1
        assert condorcet_winner(P) == rows[0]


def test_cyclic_has_no_condorcet_winner():
    for s in range(30):
        for n in (3, 4, 7):
            assert condorcet_winner(random_game(RngStream(s), n, "cyclic")[0].P) is None


def test_random_game_determinism():
    a = random_game(RngStream(123, 4), 4, "uniform")
    b = random_game(RngStream(123, 4), 4, "uniform")
    assert a[0].P.tobytes() == b[0].P.tobytes()
    c = random_game(RngStream(123, 5), 4, "uniform")
    assert not np.array_equal(a[0].P, c[0].P)


def test_random_game_rejects_small_n():
    with pytest.raises(ValueError):
        random_game(RngStream(0), 1)


def test_json_round_trip_is_lossless():
    g = random_game(RngStream(99), 6, "uniform", contexts=2)
    h = PreferenceGame.from_json(g.to_json())
    for a, b in zip(g.contexts, h.contexts):
        assert a.P.tobytes() == b.P.tobytes()
        assert a.context_id == b.context_id
        assert a.responses == b.responses


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-12)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.14384, abs=1e-5)
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_kl_infinite_without_floor():
    with pytest.raises(InfiniteDivergenceError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    assert math.isfinite(kl_divergence([0.5, 0.5], [1.0, 0.0], floor=True))


def test_entropy_examples():
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy(uniform(4)) == pytest.approx(math.log(4))
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))


def test_winrate_examples():
    g = single_context(rps_matrix())
    assert expected_winrate(g, [point_mass(3, ROCK)], [point_mass(3, SCISSORS)]) == 1.0
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = rng.dirichlet(np.ones(3))
        # brute-force sum over the 9 ordered pairs
        brute = sum((1 / 3) * b[j] * rps_matrix()[i, j] for i, j in itertools.product(range(3), repeat=2))
        assert expected_winrate(g, [uniform(3)], [b]) == pytest.approx(brute, abs=1e-15)
        assert brute == pytest.approx(0.5, abs=1e-12)
        assert expected_winrate(g, [b], [b]) == pytest.approx(0.5, abs=1e-12)


def test_winrate_mismatched_contexts():
    g = random_game(RngStream(0), 3, contexts=2)
    with pytest.raises(ValueError):
        expected_winrate(g, [uniform(3)], [uniform(3)])


def test_winrate_complement_on_generated_games():
    rng = np.random.default_rng(1)
    for s in range(50):
        n = int(rng.integers(2, 9))
        g = random_game(RngStream(s), n, ("uniform", "condorcet", "cyclic")[s % 3], contexts=2)
        a = [rng.dirichlet(np.ones(n)) for _ in range(2)]
        b = [rng.dirichlet(np.ones(n)) for _ in range(2)]
        assert expected_winrate(g, a, b) + expected_winrate(g, b, a) == pytest.approx(1.0, abs=1e-9)


def test_pinsker_on_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(2, 20))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        assert kl_divergence(p, q) >= 0.5 * np.abs(p - q).sum() ** 2 - 1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-30, 30), min_size=2, max_size=12),
    st.floats(-1e3, 1e3),
)
def test_softmax_shift_invariance(theta, c):
    theta = np.array(theta)
    assert np.max(np.abs(softmax(theta) - softmax(theta + c))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20).filter(lambda v: sum(v) > 1e-3))
def test_floor_gives_floored_policy(v):
    q = apply_floor(np.array(v), 1e-3)
    assert is_policy(q, 1e-3)


def test_floor_is_idempotent_on_valid_policies():
    p = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(apply_floor(p), p / p.sum())


def test_logit_policy_round_trip():
    pol = [np.array([0.2, 0.8]), np.array([0.1, 0.3, 0.6])]
    lp = LogitPolicy.from_policy(pol)
    for a, b in zip(lp.policy(), pol):
        assert np.allclose(a, b, atol=1e-15)


def test_context_game_is_read_only():
    c = ContextGame("x", rps_matrix())
    with pytest.raises(ValueError):
        c.P[0, 0] = 1.0
