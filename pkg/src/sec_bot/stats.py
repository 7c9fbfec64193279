"""Aggregate statistics over games and the unpaired Welch t-test."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from scipy.special import betainc

SIGNIFICANCE = 0.05


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_value: float

    def significant(self, alpha: float = SIGNIFICANCE) -> bool:
        return self.p_value < alpha


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-tailed unpaired t-test without assuming equal variances.

    ``t`` is positive when mean(a) > mean(b).
    """
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two observations")
    ma, mb = statistics.fmean(a), statistics.fmean(b)
    va, vb = statistics.variance(a, ma) / len(a), statistics.variance(b, mb) / len(b)
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return WelchResult(0.0, float(len(a) + len(b) - 2), 1.0)
        return WelchResult(math.copysign(math.inf, ma - mb), float(len(a) + len(b) - 2), 0.0)
    t = (ma - mb) / math.sqrt(se2)
    # Welch-Satterthwaite, written on variance shares so tiny variances cannot underflow
    wa, wb = va / se2, vb / se2
    df = 1.0 / (wa * wa / (len(a) - 1) + wb * wb / (len(b) - 1))
    # P(|T| > |t|) for Student's t with df degrees of freedom
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return WelchResult(t, df, p)


def kd_ratio(kills: int, deaths: int) -> float:
    """Kills per death; zero deaths count as one so the ratio stays finite."""
    return kills / max(deaths, 1)


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    m = statistics.fmean(values)
    if len(values) < 2:
        return m, 0.0
    return m, statistics.stdev(values, m) / math.sqrt(len(values))


@dataclass(frozen=True)
class GameSummary:
    kills: int
    deaths: int
    adjustments_up: int = 0
    adjustments_down: int = 0
    clearances: int = 0
    max_index: int = 0

    @property
    def outcome(self) -> str:
        if self.kills > self.deaths:
            return "win"
        if self.kills < self.deaths:
            return "lose"
        return "draw"

    @property
    def kd_ratio(self) -> float:
        return kd_ratio(self.kills, self.deaths)


@dataclass(frozen=True)
class AggregateStats:
    games: int
    kills: int
    deaths: int
    wins: int
    losses: int
    draws: int
    adjustments_up: int
    adjustments_down: int
    clearances: int

    @property
    def kd_ratio(self) -> float:
        return kd_ratio(self.kills, self.deaths)

    @classmethod
    def from_games(cls, games: Sequence[GameSummary]) -> "AggregateStats":
        outcomes = [g.outcome for g in games]
        return cls(len(games), sum(g.kills for g in games), sum(g.deaths for g in games),
                   outcomes.count("win"), outcomes.count("lose"), outcomes.count("draw"),
                   sum(g.adjustments_up for g in games), sum(g.adjustments_down for g in games),
                   sum(g.clearances for g in games))


@dataclass(frozen=True)
class QuartileComparison:
    q1_mean: float
    q1_se: float
    q4_mean: float
    q4_se: float
    test: WelchResult

    @property
    def improved(self) -> bool:
        return self.q4_mean > self.q1_mean and self.test.significant()


def quartile_comparison(kd_by_game: Sequence[float]) -> QuartileComparison:
    """First-quarter vs last-quarter per-game KD ratios of a training run."""
    n = len(kd_by_game) // 4
    if n < 2:
        raise ValueError("need at least 8 games to compare quartiles")
    q1, q4 = list(kd_by_game[:n]), list(kd_by_game[-n:])
    m1, se1 = mean_and_se(q1)
    m4, se4 = mean_and_se(q4)
    return QuartileComparison(m1, se1, m4, se4, welch_t_test(q4, q1))
