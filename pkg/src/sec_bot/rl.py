"""Tabular SARSA(lambda) learner for the shooting task.

The Q-table is a dense flat list of floats indexed by
``state_ordinal * N_ACTIONS + action_ordinal`` (unvisited entries read 0.0),
with a sparse dict of eligibility traces alongside it.
"""
from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

from .errors import MalformedObservationError

H_SKEWS = (-2, -1, 0, 1, 2)
V_SKEWS = (-1, 0, 1)
N_ACTIONS = len(H_SKEWS) * len(V_SKEWS)

TRACE_DROP = 1e-8

HIT_REWARD = 250.0
MISS_PENALTY = -1.0


class ActionId(NamedTuple):
    """Aim offset from the opponent's position, in skew quanta."""

    h_skew: int
    v_skew: int

    @property
    def ordinal(self) -> int:
        return (self.h_skew + 2) * len(V_SKEWS) + (self.v_skew + 1)

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "ActionId":
        return ACTIONS[ordinal]


ACTIONS: tuple[ActionId, ...] = tuple(ActionId(h, v) for h in H_SKEWS for v in V_SKEWS)
AIM_CENTER = ActionId(0, 0)


class StateKey(NamedTuple):
    rel_speed_bucket: int
    rel_direction_bucket: int
    rel_rotation_bucket: int
    distance_bucket: int


@dataclass(frozen=True)
class Discretizer:
    """Bucket layout for the four relative-kinematics features.

    Speed and distance use right-open intervals between ``*_edges``.
    Direction and rotation are split into equal circular sectors centred
    on 0 degrees, so a bearing of 359.9 lands with 0.1.
    """

    speed_edges: tuple[float, ...] = (0.1, 0.75, 1.5)
    direction_sectors: int = 8
    rotation_sectors: int = 8
    distance_edges: tuple[float, ...] = (12.0, 17.0, 22.0, 28.0)

    @property
    def bucket_counts(self) -> tuple[int, int, int, int]:
        return (
            len(self.speed_edges) + 1,
            self.direction_sectors,
            self.rotation_sectors,
            len(self.distance_edges) + 1,
        )

    @property
    def n_states(self) -> int:
        return math.prod(self.bucket_counts)

    def ordinal(self, key: StateKey) -> int:
        _, nd, nr, nx = self.bucket_counts
        return ((key[0] * nd + key[1]) * nr + key[2]) * nx + key[3]

    def key(self, ordinal: int) -> StateKey:
        _, nd, nr, nx = self.bucket_counts
        ordinal, dist = divmod(ordinal, nx)
        ordinal, rot = divmod(ordinal, nr)
        speed, direction = divmod(ordinal, nd)
        return StateKey(speed, direction, rot, dist)

    def all_keys(self) -> Iterator[StateKey]:
        for i in range(self.n_states):
            yield self.key(i)

    def discretize(self, rel_speed: float, rel_direction: float,
                   rel_rotation: float, distance: float) -> StateKey:
        for v in (rel_speed, rel_direction, rel_rotation, distance):
            if not math.isfinite(v):
                raise MalformedObservationError(f"non-finite observation field: {v!r}")
        if distance < 0 or rel_speed < 0:
            raise MalformedObservationError("speed and distance must be non-negative")
        return StateKey(
            bisect.bisect_right(self.speed_edges, rel_speed),
            _sector(rel_direction, self.direction_sectors),
            _sector(rel_rotation, self.rotation_sectors),
            bisect.bisect_right(self.distance_edges, distance),
        )


def _sector(angle_deg: float, sectors: int) -> int:
    width = 360.0 / sectors
    return int(((angle_deg + width / 2) % 360.0) // width) % sectors


DEFAULT_DISCRETIZER = Discretizer()


def discretize(obs, discretizer: Discretizer = DEFAULT_DISCRETIZER) -> StateKey:
    """Map a relative-kinematics observation onto its StateKey."""
    return discretizer.discretize(obs.rel_speed, obs.rel_direction,
                                  obs.rel_rotation, obs.distance)


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    lam: float = 0.9
    epsilon: float = 0.15
    hit_reward: float = HIT_REWARD
    miss_penalty: float = MISS_PENALTY

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        for name in ("gamma", "lam", "epsilon"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not self.hit_reward > 0 > self.miss_penalty:
            raise ValueError("need hit_reward > 0 > miss_penalty")


class QTable:
    """Q-values plus eligibility traces over StateKey x ActionId."""

    __slots__ = ("n_states", "n_actions", "values", "traces", "bucket_counts")

    def __init__(self, n_states: int = DEFAULT_DISCRETIZER.n_states,
                 n_actions: int = N_ACTIONS, values: Sequence[float] | None = None,
                 bucket_counts: tuple[int, ...] = DEFAULT_DISCRETIZER.bucket_counts):
        self.n_states = n_states
        self.n_actions = n_actions
        self.bucket_counts = tuple(bucket_counts)
        if values is None:
            self.values = [0.0] * (n_states * n_actions)
        else:
            if len(values) != n_states * n_actions:
                raise ValueError("values length does not match table shape")
            self.values = [float(v) for v in values]
        self.traces: dict[int, float] = {}

    @classmethod
    def for_discretizer(cls, discretizer: Discretizer) -> "QTable":
        return cls(discretizer.n_states, N_ACTIONS, bucket_counts=discretizer.bucket_counts)

    def get(self, state: int, action: int) -> float:
        return self.values[state * self.n_actions + action]

    def set(self, state: int, action: int, value: float) -> None:
        self.values[state * self.n_actions + action] = float(value)

    def row(self, state: int) -> list[float]:
        base = state * self.n_actions
        return self.values[base:base + self.n_actions]

    def nonzero(self) -> dict[tuple[int, int], float]:
        n = self.n_actions
        return {divmod(i, n): v for i, v in enumerate(self.values) if v != 0.0}

    def snapshot(self) -> tuple[float, ...]:
        """Immutable copy of the values; traces are not part of a snapshot."""
        return tuple(self.values)

    def copy(self) -> "QTable":
        q = QTable(self.n_states, self.n_actions, bucket_counts=self.bucket_counts)
        q.values = list(self.values)
        q.traces = dict(self.traces)
        return q

    def clear(self) -> None:
        self.values = [0.0] * (self.n_states * self.n_actions)
        self.traces.clear()

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return (self.n_states, self.n_actions, self.values) == (
            other.n_states, other.n_actions, other.values)

    def __repr__(self):
        return (f"QTable(n_states={self.n_states}, n_actions={self.n_actions}, "
                f"nonzero={sum(1 for v in self.values if v)}, traces={len(self.traces)})")


def state_index(state: StateKey | int, discretizer: Discretizer = DEFAULT_DISCRETIZER) -> int:
    return state if isinstance(state, int) else discretizer.ordinal(state)


def _action_index(action: ActionId | int) -> int:
    return action if isinstance(action, int) else action.ordinal


def greedy_action(q: QTable, s: int) -> int:
    row = q.row(s)
    # list.index returns the first maximum, i.e. the lowest ordinal on ties
    return row.index(max(row))


def select_action(q: QTable, s: StateKey | int, epsilon: float, rng: random.Random) -> ActionId:
    """Epsilon-greedy choice; exploitation ties go to the lowest ordinal."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return ACTIONS[rng.randrange(q.n_actions)]
    return ACTIONS[greedy_action(q, state_index(s))]


def sarsa_lambda_update(q: QTable, s: StateKey | int, a: ActionId | int, r: float,
                        s_next: StateKey | int | None, a_next: ActionId | int | None,
                        cfg: LearnerConfig) -> float:
    """One SARSA(lambda) backup with replacing traces, in place.

    Pass ``s_next=None`` for a terminal transition (no bootstrap).
    Returns the TD error.
    """
    n = q.n_actions
    values = q.values
    idx = state_index(s) * n + _action_index(a)
    if s_next is None:
        target = r
    else:
        target = r + cfg.gamma * values[state_index(s_next) * n + _action_index(a_next)]
    delta = target - values[idx]
    traces = q.traces
    traces[idx] = 1.0
    step = cfg.alpha * delta
    decay = cfg.gamma * cfg.lam
    dropped = []
    for i, e in traces.items():
        values[i] += step * e
        e *= decay
        if e < TRACE_DROP:
            dropped.append(i)
        else:
            traces[i] = e
    for i in dropped:
        del traces[i]
    return delta


def reward_for_shot(outcome, cfg: LearnerConfig | None = None) -> float:
    """+hit_reward when the shot caused damage, miss_penalty otherwise.

    ``outcome`` may be a ShotOutcome, a bool, or the strings "hit"/"miss".
    """
    cfg = cfg or _DEFAULT_CFG
    if isinstance(outcome, str):
        if outcome not in ("hit", "miss"):
            raise ValueError(f"unknown shot outcome {outcome!r}")
        hit = outcome == "hit"
    elif isinstance(outcome, bool):
        hit = outcome
    else:
        hit = outcome.hit
    return cfg.hit_reward if hit else cfg.miss_penalty


_DEFAULT_CFG = LearnerConfig()


def reset_traces(q: QTable) -> QTable:
    q.traces.clear()
    return q


class SarsaLambdaLearner:
    """Stateful wrapper running the SARSA(lambda) control loop over one QTable.

    The caller feeds (reward, next state) transitions; the pending
    (state, action) pair is kept between calls so the next action is
    chosen before the backup, as SARSA requires.
    """

    def __init__(self, q: QTable | None = None, cfg: LearnerConfig | None = None,
                 discretizer: Discretizer = DEFAULT_DISCRETIZER, learning: bool = True):
        self.cfg = cfg or LearnerConfig()
        self.discretizer = discretizer
        self.q = q if q is not None else QTable.for_discretizer(discretizer)
        self.learning = learning
        self.pending: tuple[int, int] | None = None

    def act(self, state: int, rng: random.Random) -> int:
        if self.pending is None:
            self.pending = (state, select_action(self.q, state, self.cfg.epsilon, rng).ordinal)
        return self.pending[1]

    def observe(self, reward: float, next_state: int | None, rng: random.Random) -> None:
        """Close the pending transition; ``next_state=None`` ends the episode."""
        s, a = self.pending
        if next_state is None:
            if self.learning:
                sarsa_lambda_update(self.q, s, a, reward, None, None, self.cfg)
            self.end_episode()
            return
        a_next = select_action(self.q, next_state, self.cfg.epsilon, rng).ordinal
        if self.learning:
            sarsa_lambda_update(self.q, s, a, reward, next_state, a_next, self.cfg)
        self.pending = (next_state, a_next)

    def end_episode(self) -> None:
        reset_traces(self.q)
        self.pending = None

    def replace_table(self, q: QTable, rng: random.Random) -> None:
        """Swap in a new live table and re-choose the pending action from it."""
        self.q = q
        reset_traces(q)
        if self.pending is not None:
            s = self.pending[0]
            self.pending = (s, select_action(q, s, self.cfg.epsilon, rng).ordinal)
