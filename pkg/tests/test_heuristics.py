"""Absent-level routing heuristics: semantics and coin discipline."""
import numpy as np
import pytest

from absentrf.heuristics import (
    GO_LEFT,
    GO_RIGHT,
    MISSING_DATA_SET,
    STOP_HERE,
    Heuristic,
    RoutingContext,
    parse_heuristic,
    resolve,
)
from absentrf.seeding import Coins


class CountingCoin:
    """Uniform source that records how often it is consulted."""

    def __init__(self, values=(0.3,)):
        self.values = list(values)
        self.calls = 0

    def __call__(self):
        v = self.values[self.calls % len(self.values)]
        self.calls += 1
        return v


def ctx(left, right, node_id=0):
    return RoutingContext(node_id=node_id, left_size=left, right_size=right)


def test_parse_heuristic():
    assert parse_heuristic("dbi") is Heuristic.DBI
    assert parse_heuristic("onehot") is Heuristic.ONE_HOT
    with pytest.raises(ValueError, match="unknown heuristic"):
        parse_heuristic("leftish")


def test_missing_data_set_membership():
    tokens = [h.token for h in MISSING_DATA_SET]
    assert tokens == ["stop", "majority", "random", "dbi"]
    assert Heuristic.LEFT not in MISSING_DATA_SET
    assert Heuristic.RIGHT not in MISSING_DATA_SET
    assert Heuristic.ONE_HOT not in MISSING_DATA_SET


def test_deterministic_heuristics_consume_no_coin():
    coin = CountingCoin()
    assert resolve(Heuristic.LEFT, ctx(1, 9), coin) == GO_LEFT
    assert resolve(Heuristic.RIGHT, ctx(9, 1), coin) == GO_RIGHT
    assert resolve(Heuristic.STOP, ctx(5, 5), coin) == STOP_HERE
    out = resolve(Heuristic.DBI, ctx(1, 3), coin)
    assert coin.calls == 0
    assert out.kind == "both"


def test_majority_follows_larger_daughter():
    coin = CountingCoin()
    assert resolve(Heuristic.MAJORITY, ctx(7, 3), coin) == GO_LEFT
    assert resolve(Heuristic.MAJORITY, ctx(3, 7), coin) == GO_RIGHT
    assert coin.calls == 0


def test_majority_breaks_exact_tie_with_one_coin():
    coin = CountingCoin(values=[0.49])
    assert resolve(Heuristic.MAJORITY, ctx(4, 4), coin) == GO_LEFT
    assert coin.calls == 1
    coin = CountingCoin(values=[0.51])
    assert resolve(Heuristic.MAJORITY, ctx(4, 4), coin) == GO_RIGHT
    assert coin.calls == 1


def test_random_goes_left_with_probability_left_share():
    coin = CountingCoin(values=[0.24])
    assert resolve(Heuristic.RANDOM, ctx(1, 3), coin) == GO_LEFT  # 0.24 < 0.25
    assert coin.calls == 1
    coin = CountingCoin(values=[0.25])
    assert resolve(Heuristic.RANDOM, ctx(1, 3), coin) == GO_RIGHT  # 0.25 >= 0.25
    assert coin.calls == 1


def test_dbi_weights_are_daughter_shares():
    out = resolve(Heuristic.DBI, ctx(2, 6), lambda: 0.0)
    assert out.kind == "both"
    assert out.w_left == pytest.approx(0.25)
    assert out.w_right == pytest.approx(0.75)
    assert out.w_left + out.w_right == pytest.approx(1.0, abs=1e-12)


def test_onehot_cannot_route():
    with pytest.raises(ValueError, match="dataset transform"):
        resolve(Heuristic.ONE_HOT, ctx(1, 1), lambda: 0.0)


def test_degenerate_context_rejected():
    with pytest.raises(ValueError):
        resolve(Heuristic.RANDOM, ctx(0, 0), lambda: 0.0)
    with pytest.raises(ValueError):
        resolve(Heuristic.DBI, ctx(0, 0), lambda: 0.0)


def test_random_long_run_frequency_matches_left_share():
    coins = Coins(master=314)
    context = ctx(3, 7)
    n = 20000
    draws = coins.uniforms(0, context.node_id, np.arange(n, dtype=np.uint64))
    lefts = sum(
        resolve(Heuristic.RANDOM, context, lambda i=i: float(draws[i])) == GO_LEFT
        for i in range(n)
    )
    assert abs(lefts / n - 0.3) < 0.02


def test_majority_tie_coin_is_fair():
    coins = Coins(master=2718)
    context = ctx(5, 5)
    n = 20000
    draws = coins.uniforms(1, context.node_id, np.arange(n, dtype=np.uint64))
    lefts = sum(
        resolve(Heuristic.MAJORITY, context, lambda i=i: float(draws[i])) == GO_LEFT
        for i in range(n)
    )
    assert abs(lefts / n - 0.5) < 0.02
