import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sec_bot.errors import MalformedObservationError
from sec_bot.rl import (ACTIONS, AIM_CENTER, DEFAULT_DISCRETIZER, N_ACTIONS, ActionId, Discretizer,
                        LearnerConfig, QTable, StateKey, greedy_action, reset_traces, reward_for_shot,
                        sarsa_lambda_update, select_action)

from oracles import (DEFAULT_CFG, chain_oracle, chain_with_library, interval_bucket, sector_bucket)


def test_action_grid():
    assert len(ACTIONS) == N_ACTIONS == 15
    assert len(set(ACTIONS)) == 15
    assert [a.ordinal for a in ACTIONS] == list(range(15))
    assert ActionId.from_ordinal(AIM_CENTER.ordinal) == ActionId(0, 0)


def test_state_space_size():
    assert DEFAULT_DISCRETIZER.bucket_counts == (4, 8, 8, 5)
    assert DEFAULT_DISCRETIZER.n_states == 1280
    keys = list(DEFAULT_DISCRETIZER.all_keys())
    assert len(set(keys)) == 1280
    assert all(DEFAULT_DISCRETIZER.ordinal(k) == i for i, k in enumerate(keys))


def test_discretize_origin():
    assert DEFAULT_DISCRETIZER.discretize(0.0, 0.0, 0.0, 0.0) == StateKey(0, 0, 0, 0)


def test_discretize_circular_wrap():
    d = DEFAULT_DISCRETIZER
    assert d.discretize(0, 359.9, 0, 5).rel_direction_bucket == d.discretize(0, 0.1, 0, 5).rel_direction_bucket
    assert d.discretize(0, 0, 359.9, 5).rel_rotation_bucket == d.discretize(0, 0, 0.1, 5).rel_rotation_bucket


@pytest.mark.parametrize("bad", [(math.nan, 0, 0, 1), (0, math.inf, 0, 1), (0, 0, 0, -1.0), (-0.5, 0, 0, 1)])
def test_discretize_rejects_malformed(bad):
    with pytest.raises(MalformedObservationError):
        DEFAULT_DISCRETIZER.discretize(*bad)


def test_discretize_sweep_matches_boundary_oracle():
    d = DEFAULT_DISCRETIZER
    r = random.Random(7)
    counts = d.bucket_counts
    for _ in range(1000):
        obs = (r.uniform(0, 3), r.uniform(-720, 720), r.uniform(0, 360), r.uniform(0, 60))
        key = d.discretize(*obs)
        assert all(0 <= k < c for k, c in zip(key, counts))
        assert key == (interval_bucket(obs[0], d.speed_edges), sector_bucket(obs[1], d.direction_sectors),
                       sector_bucket(obs[2], d.rotation_sectors), interval_bucket(obs[3], d.distance_edges))


def test_discretize_edges_are_right_open():
    d = DEFAULT_DISCRETIZER
    assert d.discretize(0.1, 0, 0, 0).rel_speed_bucket == 1
    assert d.discretize(0.0999, 0, 0, 0).rel_speed_bucket == 0
    assert d.discretize(0, 22.5, 0, 0).rel_direction_bucket == 1
    assert d.discretize(0, 22.4999, 0, 0).rel_direction_bucket == 0
    assert d.discretize(0, 0, 0, 28.0).distance_bucket == 4


def test_select_greedy(rng):
    q = QTable()
    q.set(5, AIM_CENTER.ordinal, 5.0)
    assert select_action(q, 5, 0.0, rng) == ActionId(0, 0)


def test_select_tie_breaks_lowest_ordinal(rng):
    q = QTable()
    assert select_action(q, 0, 0.0, rng) == ACTIONS[0]
    for a in range(15):
        q.set(1, a, 3.0)
    q.set(1, 0, 2.0)
    assert select_action(q, 1, 0.0, rng) == ACTIONS[1]


def test_select_uniform_exploration():
    q = QTable()
    q.set(0, 7, 100.0)
    r = random.Random(3)
    n = 150_000
    freq = Counter(select_action(q, 0, 1.0, r).ordinal for _ in range(n))
    assert set(freq) == set(range(15))
    assert all(abs(c / n - 1 / 15) < 0.01 for c in freq.values())


def test_select_rejects_bad_epsilon(rng):
    with pytest.raises(ValueError):
        select_action(QTable(), 0, 1.5, rng)


def test_single_step_example():
    q = QTable()
    cfg = LearnerConfig(alpha=0.1, gamma=0.9, lam=0.9)
    delta = sarsa_lambda_update(q, 3, 4, -1.0, 9, 2, cfg)
    assert delta == -1.0
    assert q.get(3, 4) == pytest.approx(-0.1, abs=1e-15)
    assert q.traces == {3 * N_ACTIONS + 4: pytest.approx(0.81)}


def test_zero_delta_leaves_values():
    q = QTable()
    sarsa_lambda_update(q, 0, 0, 0.0, 1, 0, DEFAULT_CFG)
    assert not q.nonzero()
    assert len(q.traces) == 1


def test_terminal_update_does_not_bootstrap():
    q = QTable()
    q.set(1, 0, 50.0)
    cfg = LearnerConfig(alpha=0.5)
    sarsa_lambda_update(q, 0, 0, 10.0, None, None, cfg)
    assert q.get(0, 0) == 5.0


def test_chain_mdp_matches_oracle():
    cfg = LearnerConfig(alpha=0.2, gamma=0.9, lam=0.8, epsilon=0.2)
    q = chain_with_library(50, 11, cfg)
    oracle = chain_oracle(50, 11, cfg)
    for (s, a), v in oracle.items():
        assert abs(q.get(s, a) - v) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=15, max_size=15),
       st.floats(1e-3, 1e3))
def test_greedy_invariant_to_positive_scaling(row, scale):
    q = QTable()
    for a, v in enumerate(row):
        q.set(0, a, v)
        q.set(1, a, v * scale)
    assert greedy_action(q, 0) == greedy_action(q, 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.integers(1, 30))
def test_trace_decays_geometrically(gamma, lam, k):
    cfg = LearnerConfig(alpha=0.1, gamma=gamma, lam=lam)
    q = QTable()
    sarsa_lambda_update(q, 0, 0, 1.0, 1, 0, cfg)
    idx = 0
    for step in range(1, k + 1):
        sarsa_lambda_update(q, 1 + step, 1, 0.0, 1, 0, cfg)  # never revisits (0, 0)
        expected = (gamma * lam) ** (step + 1)
        if expected < 1e-8:
            assert idx not in q.traces
            break
        assert q.traces[idx] == pytest.approx(expected, rel=1e-12)


def test_reward_examples():
    assert reward_for_shot("hit") == 250.0
    assert reward_for_shot("miss") == -1.0
    assert sum(reward_for_shot(o) for o in ("hit", "miss", "miss")) == 248.0
    with pytest.raises(ValueError):
        reward_for_shot("graze")


def test_reset_traces():
    q = QTable()
    for i in range(10):
        q.traces[i] = 0.5
        q.values[i] = float(i)
    before = list(q.values)
    assert reset_traces(q) is q
    assert not q.traces and q.values == before
    assert not reset_traces(QTable()).traces
    sarsa_lambda_update(q, 20, 0, 1.0, 21, 0, DEFAULT_CFG)
    assert len([v for v in q.traces.values() if v]) == 1


def test_convergence_two_state_mdp():
    # s0: a0 -> s1 (r 0), a1 -> end (r 1); s1: a0 -> end (r 10), a1 -> end (r 0)
    def step(s, a):
        if s == 0:
            return (0.0, 1) if a == 0 else (1.0, None)
        return (10.0, None) if a == 0 else (0.0, None)

    cfg = LearnerConfig(alpha=0.1, gamma=0.9, lam=0.9, epsilon=0.2)
    q = QTable(2, 2, bucket_counts=(2, 1, 1, 1))
    r = random.Random(5)
    for _ in range(1000):
        q.traces.clear()
        s, a = 0, select_action(q, 0, cfg.epsilon, r).ordinal
        while True:
            rew, s2 = step(s, a)
            if s2 is None:
                sarsa_lambda_update(q, s, a, rew, None, None, cfg)
                break
            a2 = select_action(q, s2, cfg.epsilon, r).ordinal
            sarsa_lambda_update(q, s, a, rew, s2, a2, cfg)
            s, a = s2, a2
    assert greedy_action(q, 0) == 0 and greedy_action(q, 1) == 0


def test_training_is_bit_reproducible():
    a = chain_with_library(30, 99, DEFAULT_CFG)
    b = chain_with_library(30, 99, DEFAULT_CFG)
    assert a.values == b.values


@pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"gamma": 1.5}, {"lam": -0.1}, {"epsilon": 2.0},
                                {"miss_penalty": 1.0}])
def test_learner_config_validation(kw):
    with pytest.raises(ValueError):
        LearnerConfig(**kw)


def test_snapshot_excludes_traces():
    q = QTable()
    sarsa_lambda_update(q, 0, 0, 1.0, 1, 0, DEFAULT_CFG)
    snap = q.snapshot()
    assert isinstance(snap, tuple) and len(snap) == q.n_states * q.n_actions
    assert QTable(values=snap).traces == {}


def test_custom_discretizer_counts():
    d = Discretizer(speed_edges=(1.0,), direction_sectors=4, rotation_sectors=2, distance_edges=())
    assert d.bucket_counts == (2, 4, 2, 1) and d.n_states == 16
    assert QTable.for_discretizer(d).n_states == 16
