"""Discrete-time 1-vs-1 deathmatch on a bounded 2D arena.

Angles are in degrees, counter-clockwise positive; speeds are arena
units per tick. The learner's movement is scripted (strafe around the
opponent at a preferred range, always facing it); only its aim is learned.
"""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

from .rl import (ACTIONS, DEFAULT_DISCRETIZER, ActionId, Discretizer, LearnerConfig,
                 SarsaLambdaLearner, reward_for_shot)


@dataclass(frozen=True)
class ArenaConfig:
    size: float = 40.0
    spawn_points: tuple[tuple[float, float], ...] = ((12.0, 12.0), (28.0, 12.0), (12.0, 28.0), (28.0, 28.0))
    tick_seconds: float = 0.25
    base_speed: float = 1.0
    max_health: int = 100
    damage: int = 18
    rounds_per_tick: int = 3  # burst fired by each side per tick
    p_max: float = 0.85
    cone_deg: float = 6.0
    skew_h_deg: float = 4.0
    skew_v_deg: float = 3.0
    bullet_speed: float = 14.0
    drop_deg_per_unit: float = 0.12
    min_distance: float = 2.0
    range_floor: float = 0.3
    falloff_power: float = 1.0
    learner_band: tuple[float, float] = (8.0, 14.0)
    learner_flip_prob: float = 0.08
    learner_speeds: tuple[float, ...] = (0.65, 1.0)
    learner_mode_prob: float = 0.1  # chance per tick of a new strafe/speed mode
    opponents_compensate_drop: bool = True
    opponent_band: tuple[float, float] = (8.0, 14.0)
    closing_band: tuple[float, float] = (3.0, 6.0)
    strafe_flip_prob: float = 0.05
    dodge_flip_prob: float = 0.25
    weak_health: int = 25
    radial_weight: float = 1.0

    @property
    def max_range(self) -> float:
        return self.size * math.sqrt(2.0)


DEFAULT_ARENA = ArenaConfig()


@dataclass(frozen=True)
class OpponentProfile:
    level: int
    speed_fraction: float
    aim_error_deg: float
    fov_deg: float
    turn_rate: float  # revolutions per second
    moves_in_combat: bool
    dodges: bool = False
    closes_in: bool = False
    leads_target: bool = False
    holds_position: bool = False

    def max_turn_deg(self, tick_seconds: float) -> float:
        return self.turn_rate * 360.0 * tick_seconds


PROFILES: dict[int, OpponentProfile] = {
    1: OpponentProfile(1, 0.6, 30.0, 30.0, 0.30, moves_in_combat=False, holds_position=True),
    2: OpponentProfile(2, 0.7, 24.0, 35.0, 0.40, moves_in_combat=False, holds_position=True),
    3: OpponentProfile(3, 0.8, 18.0, 40.0, 0.55, moves_in_combat=True),
    4: OpponentProfile(4, 0.9, 14.0, 60.0, 0.65, moves_in_combat=True),
    5: OpponentProfile(5, 1.0, 12.0, 80.0, 0.72, moves_in_combat=True,
                       dodges=True, closes_in=True, leads_target=True),
}


@dataclass
class Combatant:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    facing: float = 0.0  # body yaw: movement heading, or the aim when standing still
    aim: float = 0.0
    health: int = 100
    strafe: int = 1
    speed_scale: float = 1.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


class RelativeKinematics(NamedTuple):
    """Opponent kinematics seen from the learner's egocentric frame."""

    rel_speed: float
    rel_direction: float  # heading of relative velocity, 0 = straight ahead
    rel_rotation: float  # opponent body yaw relative to facing the learner head-on
    distance: float
    bearing: float  # where the opponent is, 0 = dead ahead
    lateral_speed: float  # relative velocity across the line of sight, CCW positive


class ShotOutcome(NamedTuple):
    hit: bool
    damage: int

    @property
    def result(self) -> str:
        return "hit" if self.hit else "miss"


MISS = ShotOutcome(False, 0)


def wrap180(angle: float) -> float:
    return (angle + 180.0) % 360.0 - 180.0


def _bearing(src: Combatant, dst: Combatant) -> float:
    return math.degrees(math.atan2(dst.y - src.y, dst.x - src.x)) % 360.0


def _lateral(src: Combatant, dst: Combatant) -> float:
    dx, dy = dst.x - src.x, dst.y - src.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return 0.0
    return (dx * (dst.vy - src.vy) - dy * (dst.vx - src.vx)) / d


def observe(learner: Combatant, opponent: Combatant) -> RelativeKinematics:
    th = math.radians(learner.facing)
    c, s = math.cos(th), math.sin(th)
    vrx, vry = opponent.vx - learner.vx, opponent.vy - learner.vy
    dx, dy = opponent.x - learner.x, opponent.y - learner.y
    speed = math.hypot(vrx, vry)
    direction = math.degrees(math.atan2(-vrx * s + vry * c, vrx * c + vry * s)) % 360.0 if speed > 0 else 0.0
    distance = math.hypot(dx, dy)
    bearing = math.degrees(math.atan2(-dx * s + dy * c, dx * c + dy * s)) % 360.0 if distance > 0 else 0.0
    lateral = (dx * vry - dy * vrx) / distance if distance > 0 else 0.0
    return RelativeKinematics(speed, direction, (opponent.facing - learner.facing - 180.0) % 360.0,
                              distance, bearing, lateral)


def lead_angle(lateral_speed: float, cfg: ArenaConfig = DEFAULT_ARENA) -> float:
    """Horizontal angle a shooter must lead a target moving across its sight line."""
    ratio = max(-1.0, min(1.0, lateral_speed / cfg.bullet_speed))
    return math.degrees(math.asin(ratio))


def drop_angle(distance: float, cfg: ArenaConfig = DEFAULT_ARENA) -> float:
    return cfg.drop_deg_per_unit * max(0.0, distance - cfg.min_distance)


def range_factor(distance: float, cfg: ArenaConfig = DEFAULT_ARENA) -> float:
    span = cfg.max_range - cfg.min_distance
    frac = min(1.0, max(0.0, (distance - cfg.min_distance) / span))
    return 1.0 - (1.0 - cfg.range_floor) * frac


def hit_probability(h_error: float, v_error: float, distance: float,
                    cfg: ArenaConfig = DEFAULT_ARENA) -> float:
    """p_max at the cone centre, falling to 0 at the cone edge, scaled by range."""
    err = math.hypot(h_error, v_error)
    if err >= cfg.cone_deg:
        return 0.0
    return cfg.p_max * (1.0 - err / cfg.cone_deg) ** cfg.falloff_power * range_factor(distance, cfg)


def learner_hit_probability(action: ActionId, geo: RelativeKinematics,
                            cfg: ArenaConfig = DEFAULT_ARENA) -> float:
    h_err = action.h_skew * cfg.skew_h_deg - lead_angle(geo.lateral_speed, cfg)
    v_err = action.v_skew * cfg.skew_v_deg - drop_angle(geo.distance, cfg)
    return hit_probability(h_err, v_err, geo.distance, cfg)


def resolve_learner_shot(action: ActionId, geo: RelativeKinematics, rng: random.Random,
                         cfg: ArenaConfig = DEFAULT_ARENA) -> ShotOutcome:
    if rng.random() < learner_hit_probability(action, geo, cfg):
        return ShotOutcome(True, cfg.damage)
    return MISS


class OpponentDecision(NamedTuple):
    aim: float
    velocity: tuple[float, float]
    fired: bool
    shots: tuple[ShotOutcome, ...]

    @property
    def damage(self) -> int:
        return sum(s.damage for s in self.shots)


def _steer(mover: Combatant, target: Combatant, speed: float, band: tuple[float, float],
           flip_prob: float, rng: random.Random, radial_weight: float = 1.0) -> tuple[float, float]:
    """Strafe around ``target`` while holding range inside ``band``."""
    if rng.random() < flip_prob:
        mover.strafe = -mover.strafe
    dx, dy = target.x - mover.x, target.y - mover.y
    d = math.hypot(dx, dy)
    if d == 0.0 or speed == 0.0:
        return (0.0, 0.0)
    ux, uy = dx / d, dy / d
    radial = radial_weight if d > band[1] else (-radial_weight if d < band[0] else 0.0)
    mx = radial * ux - mover.strafe * uy
    my = radial * uy + mover.strafe * ux
    norm = math.hypot(mx, my)
    if norm == 0.0:
        return (0.0, 0.0)
    return (speed * mx / norm, speed * my / norm)


def opponent_policy_step(profile: OpponentProfile, learner: Combatant, opponent: Combatant,
                         rng: random.Random, cfg: ArenaConfig = DEFAULT_ARENA) -> OpponentDecision:
    """Turn, maybe fire, and choose a velocity for the scripted opponent."""
    target = _bearing(opponent, learner)
    turn = wrap180(target - opponent.aim)
    limit = profile.max_turn_deg(cfg.tick_seconds)
    aim = (opponent.aim + max(-limit, min(limit, turn))) % 360.0
    fired = abs(wrap180(target - aim)) <= profile.fov_deg / 2.0

    shots = ()
    if fired:
        distance = math.hypot(learner.x - opponent.x, learner.y - opponent.y)
        lead = 0.0 if profile.leads_target else lead_angle(_lateral(opponent, learner), cfg)
        drop = 0.0 if (profile.leads_target or cfg.opponents_compensate_drop) else drop_angle(distance, cfg)
        outcomes = []
        for _ in range(cfg.rounds_per_tick):
            noise = rng.uniform(-profile.aim_error_deg, profile.aim_error_deg)
            hit = rng.random() < hit_probability(noise - lead, -drop, distance, cfg)
            outcomes.append(ShotOutcome(True, cfg.damage) if hit else MISS)
        shots = tuple(outcomes)

    speed = profile.speed_fraction * cfg.base_speed
    if profile.holds_position:
        if opponent.health < cfg.weak_health:
            d = math.hypot(learner.x - opponent.x, learner.y - opponent.y) or 1.0
            velocity = (speed * (opponent.x - learner.x) / d, speed * (opponent.y - learner.y) / d)
        else:
            velocity = (0.0, 0.0)
    elif fired and not profile.moves_in_combat:
        velocity = (0.0, 0.0)
    else:
        band = cfg.closing_band if profile.closes_in else cfg.opponent_band
        flip = cfg.dodge_flip_prob if profile.dodges else cfg.strafe_flip_prob
        velocity = _steer(opponent, learner, speed, band, flip, rng, cfg.radial_weight)
    return OpponentDecision(aim, velocity, fired, shots)


class Incident(str, Enum):
    LEARNER_KILLED_OPPONENT = "kill"
    LEARNER_DIED = "death"


class LogRecord(NamedTuple):
    tick: int
    actor: str
    event: str
    learner_kills: int
    learner_deaths: int
    milestone_index: int


LOG_COLUMNS = LogRecord._fields


@dataclass
class GameLog:
    records: list[LogRecord] = field(default_factory=list)
    learner_kills: int = 0
    learner_deaths: int = 0

    @property
    def opponent_kills(self) -> int:
        return self.learner_deaths

    @property
    def opponent_deaths(self) -> int:
        return self.learner_kills

    def add(self, tick: int, actor: str, event: str, milestone_index: int) -> None:
        self.records.append(LogRecord(tick, actor, event, self.learner_kills,
                                      self.learner_deaths, milestone_index))

    @property
    def outcome(self) -> str:
        if self.learner_kills > self.learner_deaths:
            return "win"
        if self.learner_kills < self.learner_deaths:
            return "lose"
        return "draw"

    @property
    def kd_ratio(self) -> float:
        """Kills per death; a deathless game counts as kills / 1."""
        return self.learner_kills / max(self.learner_deaths, 1)

    def incidents(self) -> list[LogRecord]:
        return [r for r in self.records if r.event in ("kill", "death")]

    def to_csv(self, fh=None) -> str | None:
        out = fh if fh is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        writer.writerows(self.records)
        if fh is None:
            return out.getvalue()
        return None


def respawn(who: Combatant, killer_pos: tuple[float, float], cfg: ArenaConfig = DEFAULT_ARENA) -> None:
    """Full health at the spawn point farthest from the killer."""
    kx, ky = killer_pos
    sx, sy = max(cfg.spawn_points, key=lambda p: (p[0] - kx) ** 2 + (p[1] - ky) ** 2)
    who.x, who.y, who.vx, who.vy = sx, sy, 0.0, 0.0
    who.health = cfg.max_health


def move(who: Combatant, other: Combatant, velocity: tuple[float, float],
         cfg: ArenaConfig = DEFAULT_ARENA) -> None:
    """Apply ``velocity`` clamped to the arena; blocked moves leave ``who`` in place."""
    nx = min(cfg.size, max(0.0, who.x + velocity[0]))
    ny = min(cfg.size, max(0.0, who.y + velocity[1]))
    if math.hypot(nx - other.x, ny - other.y) < cfg.min_distance:
        nx, ny = who.x, who.y
    who.vx, who.vy = nx - who.x, ny - who.y
    who.x, who.y = nx, ny


def _update_body_yaw(who: Combatant, dead: bool) -> None:
    if dead or (who.vx == 0.0 and who.vy == 0.0):
        who.facing = who.aim
    else:
        who.facing = math.degrees(math.atan2(who.vy, who.vx)) % 360.0


class World:
    """One isolated game: two combatants, a learner, an optional balancer."""

    def __init__(self, learner: SarsaLambdaLearner, profile: OpponentProfile, rng: random.Random,
                 cfg: ArenaConfig = DEFAULT_ARENA, balancer=None,
                 on_learner_death: Callable | None = None):
        self.cfg = cfg
        self.agent = learner
        self.profile = profile
        self.rng = rng
        self.balancer = balancer
        self.on_learner_death = on_learner_death
        self.discretizer: Discretizer = learner.discretizer
        self.tick = 0
        self.log = GameLog()
        a, b = cfg.spawn_points[0], cfg.spawn_points[-1]
        self.learner = Combatant(*a, health=cfg.max_health)
        self.opponent = Combatant(*b, health=cfg.max_health)
        self.learner.facing = _bearing(self.learner, self.opponent)
        self.opponent.facing = self.opponent.aim = _bearing(self.opponent, self.learner)

    @property
    def milestone_index(self) -> int:
        return self.balancer.current_index if self.balancer is not None else 0

    def state(self) -> int:
        obs = observe(self.learner, self.opponent)
        return self.discretizer.ordinal(self.discretizer.discretize(
            obs.rel_speed, obs.rel_direction, obs.rel_rotation, obs.distance))

    def step(self) -> list[Incident]:
        cfg, rng = self.cfg, self.rng
        L, O = self.learner, self.opponent
        geo = observe(L, O)
        s = self.discretizer.ordinal(self.discretizer.discretize(
            geo.rel_speed, geo.rel_direction, geo.rel_rotation, geo.distance))
        action = ACTIONS[self.agent.act(s, rng)]
        shots = [resolve_learner_shot(action, geo, rng, cfg) for _ in range(cfg.rounds_per_tick)]
        decision = opponent_policy_step(self.profile, L, O, rng, cfg)
        if cfg.learner_mode_prob and rng.random() < cfg.learner_mode_prob:
            L.strafe = rng.choice((-1, 0, 1))
            L.speed_scale = rng.choice(cfg.learner_speeds)
        learner_velocity = _steer(L, O, cfg.base_speed * L.speed_scale, cfg.learner_band,
                                  cfg.learner_flip_prob, rng, cfg.radial_weight)
        O.aim = decision.aim

        O.health -= sum(shot.damage for shot in shots)
        L.health -= decision.damage
        opponent_dead = O.health <= 0
        learner_dead = L.health <= 0
        learner_pos, opponent_pos = L.position, O.position

        if learner_dead:
            respawn(L, opponent_pos, cfg)
        if opponent_dead:
            respawn(O, L.position if learner_dead else learner_pos, cfg)
        if not learner_dead:
            move(L, O, learner_velocity, cfg)
        if not opponent_dead:
            move(O, L, decision.velocity, cfg)
        _update_body_yaw(O, opponent_dead)
        L.facing = _bearing(L, O)

        reward = sum(reward_for_shot(shot, self.agent.cfg) for shot in shots)
        self.agent.observe(reward, None if learner_dead else self.state(), rng)

        incidents = []
        if opponent_dead:
            self.log.learner_kills += 1
            incidents.append(Incident.LEARNER_KILLED_OPPONENT)
        if learner_dead:
            self.log.learner_deaths += 1
            incidents.append(Incident.LEARNER_DIED)
            if self.on_learner_death is not None:
                self.on_learner_death(self.agent.q)
        for inc in incidents:
            self.log.add(self.tick, "learner", inc.value, self.milestone_index)
            if self.balancer is not None:
                self._consult_balancer(inc)
        self.tick += 1
        return incidents

    def _consult_balancer(self, incident: Incident) -> None:
        before = self.milestone_index
        cleared = self.balancer.clearances
        new_q = self.balancer.on_incident(incident, self.agent.q)
        if new_q is not self.agent.q or self.balancer.clearances > cleared:
            self.agent.replace_table(new_q, self.rng)
        after = self.milestone_index
        if after > before:
            self.log.add(self.tick, "learner", "milestone_up", after)
        elif after < before:
            self.log.add(self.tick, "learner", "milestone_down", after)
        elif self.balancer.clearances > cleared:
            self.log.add(self.tick, "learner", "policy_clearance", after)


@dataclass
class GameResult:
    log: GameLog
    q: object
    balancer: object = None

    @property
    def outcome(self) -> str:
        return self.log.outcome


def run_game(duration_ticks: int, learner: SarsaLambdaLearner, profile: OpponentProfile,
             balancer=None, rng: random.Random | None = None, cfg: ArenaConfig = DEFAULT_ARENA,
             on_learner_death: Callable | None = None) -> GameResult:
    """Play one full game; without a balancer this is plain RL-only play."""
    if duration_ticks <= 0:
        raise ValueError(f"duration_ticks must be positive, got {duration_ticks}")
    rng = rng if rng is not None else random.Random(0)
    if balancer is not None:
        learner.replace_table(balancer.start(), rng)
    learner.end_episode()
    world = World(learner, profile, rng, cfg, balancer, on_learner_death)
    for _ in range(duration_ticks):
        world.step()
    return GameResult(world.log, learner.q, balancer)


def make_learner(cfg: LearnerConfig | None = None, discretizer: Discretizer = DEFAULT_DISCRETIZER,
                 learning: bool = True) -> SarsaLambdaLearner:
    return SarsaLambdaLearner(None, cfg, discretizer, learning)


def scripted_learner(action: ActionId = ActionId(0, 0), cfg: LearnerConfig | None = None,
                     discretizer: Discretizer = DEFAULT_DISCRETIZER) -> SarsaLambdaLearner:
    """A non-learning learner that always picks ``action`` (epsilon 0)."""
    base = cfg or LearnerConfig()
    learner = SarsaLambdaLearner(None, LearnerConfig(base.alpha, base.gamma, base.lam, 0.0,
                                                     base.hit_reward, base.miss_penalty),
                                 discretizer, learning=False)
    for s in range(learner.q.n_states):
        learner.q.set(s, action.ordinal, 1.0)
    return learner


@dataclass
class DuelResult:
    kills_a: int
    kills_b: int

    @property
    def kd_a(self) -> float:
        return self.kills_a / max(self.kills_b, 1)

    @property
    def kd_b(self) -> float:
        return self.kills_b / max(self.kills_a, 1)


def duel(profile_a: OpponentProfile, profile_b: OpponentProfile, duration_ticks: int,
         rng: random.Random, cfg: ArenaConfig = DEFAULT_ARENA) -> DuelResult:
    """Two scripted opponents fighting each other with the same aiming rule."""
    if duration_ticks <= 0:
        raise ValueError(f"duration_ticks must be positive, got {duration_ticks}")
    (ax, ay), (bx, by) = cfg.spawn_points[0], cfg.spawn_points[-1]
    a = Combatant(ax, ay, health=cfg.max_health)
    b = Combatant(bx, by, health=cfg.max_health)
    a.facing = a.aim = _bearing(a, b)
    b.facing = b.aim = _bearing(b, a)
    result = DuelResult(0, 0)
    for _ in range(duration_ticks):
        da = opponent_policy_step(profile_a, b, a, rng, cfg)
        db = opponent_policy_step(profile_b, a, b, rng, cfg)
        a.aim, b.aim = da.aim, db.aim
        a.health -= db.damage
        b.health -= da.damage
        a_dead, b_dead = a.health <= 0, b.health <= 0
        a_pos, b_pos = a.position, b.position
        if a_dead:
            respawn(a, b_pos, cfg)
            result.kills_b += 1
        if b_dead:
            respawn(b, a.position if a_dead else a_pos, cfg)
            result.kills_a += 1
        if not a_dead:
            move(a, b, da.velocity, cfg)
        if not b_dead:
            move(b, a, db.velocity, cfg)
        _update_body_yaw(a, a_dead)
        _update_body_yaw(b, b_dead)
    return result
