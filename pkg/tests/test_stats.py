import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ttest_ind

from sec_bot.stats import AggregateStats, GameSummary, kd_ratio, mean_and_se, quartile_comparison, welch_t_test

samples = st.lists(st.integers(-10_000, 10_000).map(lambda x: x / 100), min_size=2, max_size=30)


# scipy warns about precision loss on constant samples, which the check skips
@pytest.mark.filterwarnings("ignore:Precision loss:RuntimeWarning")
@settings(max_examples=200, deadline=None)
@given(samples, samples)
def test_welch_matches_scipy(a, b):
    ref = ttest_ind(a, b, equal_var=False)
    got = welch_t_test(a, b)
    if not math.isfinite(ref.statistic):
        return
    assert got.t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert got.p_value == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)


def test_welch_hand_example():
    # means 2 and 5, variances 1 and 4, n = 3 each
    res = welch_t_test([1, 2, 3], [3, 5, 7])
    assert res.t == pytest.approx(-3 / math.sqrt(5 / 3))
    assert res.df == pytest.approx((5 / 3) ** 2 / ((1 / 3) ** 2 / 2 + (4 / 3) ** 2 / 2))
    assert 0.05 < res.p_value < 0.2


def test_welch_needs_two_observations():
    with pytest.raises(ValueError):
        welch_t_test([1.0], [1.0, 2.0])


def test_tiny_variance_does_not_underflow():
    res = welch_t_test([0.0, 0.0], [0.0, 3e-108])
    assert math.isfinite(res.df) and 0.0 <= res.p_value <= 1.0


def test_constant_samples():
    assert welch_t_test([1, 1], [1, 1]).p_value == 1.0
    assert welch_t_test([1, 1], [2, 2]).p_value == 0.0


def test_kd_ratio_and_outcomes():
    assert kd_ratio(6, 3) == 2.0 and kd_ratio(4, 0) == 4.0
    games = [GameSummary(5, 3), GameSummary(2, 2), GameSummary(1, 4), GameSummary(7, 0)]
    agg = AggregateStats.from_games(games)
    assert (agg.wins, agg.losses, agg.draws) == (2, 1, 1)
    assert agg.wins + agg.losses + agg.draws == agg.games == 4
    assert agg.kd_ratio == 15 / 9


def test_quartile_comparison():
    kd = [0.5, 0.6, 0.55, 0.7, 1.0, 1.1, 1.2, 1.3, 1.9, 2.0, 2.1, 1.95]
    qc = quartile_comparison(kd)
    assert qc.q1_mean == pytest.approx(0.55)
    assert qc.q4_mean == pytest.approx((2.0 + 2.1 + 1.95) / 3)
    assert qc.improved
    assert mean_and_se([1.0, 3.0]) == (2.0, pytest.approx(1.0))
    with pytest.raises(ValueError):
        quartile_comparison([1.0] * 7)
