"""Training and evaluation runs that write the CSV results under one directory.

Every game gets its own ``random.Random`` seeded from a string naming the
run seed, the phase and the game number, so results do not depend on the
order or the process in which games are played.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .arena import DEFAULT_ARENA, PROFILES, ArenaConfig, GameLog, run_game
from .catalogue import Balancer, Catalogue, CatalogueBuilder, load_milestone
from .persistence import atomic_write_text, load_catalogue, save_catalogue
from .rl import DEFAULT_DISCRETIZER, LearnerConfig, SarsaLambdaLearner
from .stats import AggregateStats, GameSummary, QuartileComparison, quartile_comparison

MODES = ("sec", "rl_only")
LEVELS = (1, 2, 3, 4, 5)
WORKERS_ENV = "SEC_WORKERS"

TRAINING_COLUMNS = ("config_hash", "seed", "game", "kills", "deaths", "outcome", "kd_ratio",
                    "cumulative_deaths", "milestones")
QUARTILE_COLUMNS = ("config_hash", "seed", "games", "q1_mean", "q1_se", "q4_mean", "q4_se",
                    "t", "df", "p_value", "significant")
EVAL_COLUMNS = ("config_hash", "seed", "level", "game", "kills", "deaths", "outcome", "kd_ratio",
                "adjustments_up", "adjustments_down", "clearances", "max_index")
INCIDENT_COLUMNS = ("config_hash", "seed", "level", "game", "tick", "actor", "event",
                    "learner_kills", "learner_deaths", "milestone_index")


@dataclass(frozen=True)
class ExperimentConfig:
    game_ticks: int = 1800
    train_games: int = 30
    eval_games: int = 5
    train_level: int = 5
    seeds: tuple[int, ...] = (1, 2, 3)
    alpha: float = 0.1
    gamma: float = 0.5
    lam: float = 0.5
    epsilon: float = 0.15
    threshold: int = 5
    interval: int = 100
    start_index: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for name in ("game_ticks", "train_games", "eval_games", "interval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.train_level not in PROFILES:
            raise ValueError(f"unknown opponent level {self.train_level}")
        if self.threshold < 0 or self.start_index < 0:
            raise ValueError("threshold and start_index must be non-negative")
        self.learner_config()

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(self.alpha, self.gamma, self.lam, self.epsilon)

    @property
    def config_hash(self) -> str:
        """Digest of everything that affects results (the output path does not)."""
        data = {k: v for k, v in asdict(self).items() if k != "output_dir"}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def catalogue_dir(self, seed: int) -> Path:
        return self.out / f"seed{seed}" / "catalogue"

    @classmethod
    def load(cls, path: str | os.PathLike | None = None, **overrides) -> "ExperimentConfig":
        """Read a flat key-value YAML file, then apply non-None overrides."""
        data = {}
        if path is not None:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
            if not isinstance(data, dict):
                raise ValueError(f"{path}: expected a key-value mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


def worker_count() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _map(fn, jobs: Sequence, workers: int | None = None) -> list:
    """Run ``fn(*job)`` for every job, in parallel when allowed; results keep job order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def game_rng(seed: int, phase: str, *parts) -> random.Random:
    return random.Random(":".join(map(str, (seed, phase, *parts))))


# training

@dataclass
class TrainingRun:
    seed: int
    catalogue: Catalogue
    games: list[GameSummary]
    deaths: int
    cumulative_deaths: list[int] = field(default_factory=list)
    catalogue_sizes: list[int] = field(default_factory=list)

    @property
    def kd_by_game(self) -> list[float]:
        return [g.kd_ratio for g in self.games]

    def quartiles(self) -> QuartileComparison:
        return quartile_comparison(self.kd_by_game)


def train_seed(config: ExperimentConfig, seed: int, arena: ArenaConfig = DEFAULT_ARENA) -> TrainingRun:
    """Train one learner against the training opponent, capturing milestones."""
    learner = SarsaLambdaLearner(cfg=config.learner_config(), discretizer=DEFAULT_DISCRETIZER)
    catalogue = Catalogue(interval=config.interval, discretizer=DEFAULT_DISCRETIZER)
    builder = CatalogueBuilder(catalogue)
    profile = PROFILES[config.train_level]
    games, cumulative, sizes = [], [], []
    for g in range(config.train_games):
        result = run_game(config.game_ticks, learner, profile, rng=game_rng(seed, "train", g),
                          cfg=arena, on_learner_death=builder)
        games.append(GameSummary(result.log.learner_kills, result.log.learner_deaths))
        cumulative.append(builder.deaths)
        sizes.append(len(catalogue))
    return TrainingRun(seed, catalogue, games, builder.deaths, cumulative, sizes)


def train(config: ExperimentConfig, arena: ArenaConfig = DEFAULT_ARENA,
          workers: int | None = None) -> dict[int, TrainingRun]:
    """Train every seed, save each catalogue and write the training CSVs."""
    config.out.mkdir(parents=True, exist_ok=True)
    runs = _map(train_seed, [(config, s, arena) for s in config.seeds], workers)
    h = config.config_hash
    rows, qrows = [], []
    for run in runs:
        save_catalogue(run.catalogue, config.catalogue_dir(run.seed))
        for g, (game, cum, size) in enumerate(zip(run.games, run.cumulative_deaths, run.catalogue_sizes)):
            rows.append((h, run.seed, g, game.kills, game.deaths, game.outcome, game.kd_ratio, cum, size))
        if len(run.games) >= 8:
            qc = run.quartiles()
            qrows.append((h, run.seed, len(run.games), qc.q1_mean, qc.q1_se, qc.q4_mean, qc.q4_se,
                          qc.test.t, qc.test.df, qc.test.p_value, int(qc.test.significant())))
    write_csv(config.out / "training_games.csv", TRAINING_COLUMNS, rows)
    write_csv(config.out / "training_quartiles.csv", QUARTILE_COLUMNS, qrows)
    return {run.seed: run for run in runs}


# evaluation

@dataclass
class EvalGame:
    seed: int
    level: int
    game: int
    summary: GameSummary
    log: GameLog


_CATALOGUE_CACHE: dict[str, Catalogue] = {}


def _catalogue_for(config: ExperimentConfig, seed: int) -> Catalogue:
    key = str(config.catalogue_dir(seed).resolve())
    if key not in _CATALOGUE_CACHE:
        _CATALOGUE_CACHE[key] = load_catalogue(key)
    return _CATALOGUE_CACHE[key]


def play_eval_game(config: ExperimentConfig, mode: str, level: int, seed: int, game: int,
                   catalogue: Catalogue | None = None, arena: ArenaConfig = DEFAULT_ARENA) -> EvalGame:
    """One evaluation game; every game starts from an empty live table."""
    learner = SarsaLambdaLearner(cfg=config.learner_config(), discretizer=DEFAULT_DISCRETIZER)
    balancer = None
    if mode == "sec":
        catalogue = catalogue if catalogue is not None else _catalogue_for(config, seed)
        balancer = Balancer(catalogue, config.threshold, config.start_index)
    elif mode != "rl_only":
        raise ValueError(f"unknown mode {mode!r}")
    tag = "sec" if mode == "sec" else "rl"
    result = run_game(config.game_ticks, learner, PROFILES[level], balancer,
                      game_rng(seed, tag, level, game), arena)
    log = result.log
    if balancer is None:
        summary = GameSummary(log.learner_kills, log.learner_deaths)
    else:
        summary = GameSummary(log.learner_kills, log.learner_deaths, balancer.adjustments_up,
                              balancer.adjustments_down, balancer.clearances, balancer.max_index_reached)
    return EvalGame(seed, level, game, summary, log)


def normalize_mode(mode: str) -> str:
    mode = mode.replace("-", "_")
    if mode not in MODES:
        raise ValueError(f"mode must be one of sec, rl-only; got {mode!r}")
    return mode


def evaluate(config: ExperimentConfig, mode: str, levels: Sequence[int] = LEVELS,
             catalogues: dict[int, Catalogue] | None = None, arena: ArenaConfig = DEFAULT_ARENA,
             workers: int | None = None, write: bool = True) -> dict[int, AggregateStats]:
    """Play ``eval_games`` per seed per level and write per-level CSVs."""
    mode = normalize_mode(mode)
    if mode == "sec" and catalogues is None:
        # fail before any game is played if a catalogue is missing or corrupt
        catalogues = {s: load_catalogue(config.catalogue_dir(s)) for s in config.seeds}
    jobs = [(config, mode, lv, s, g, (catalogues or {}).get(s), arena)
            for lv in levels for s in config.seeds for g in range(config.eval_games)]
    games = _map(play_eval_game, jobs, workers)
    h = config.config_hash
    stats = {}
    for lv in levels:
        mine = [g for g in games if g.level == lv]
        stats[lv] = AggregateStats.from_games([g.summary for g in mine])
        if not write:
            continue
        config.out.mkdir(parents=True, exist_ok=True)
        write_csv(config.out / f"eval_{mode}_level{lv}.csv", EVAL_COLUMNS, [
            (h, g.seed, lv, g.game, g.summary.kills, g.summary.deaths, g.summary.outcome,
             g.summary.kd_ratio, g.summary.adjustments_up, g.summary.adjustments_down,
             g.summary.clearances, g.summary.max_index) for g in mine])
        write_csv(config.out / f"incidents_{mode}_level{lv}.csv", INCIDENT_COLUMNS, [
            (h, g.seed, lv, g.game, *rec) for g in mine for rec in g.log.records])
    return stats


def greedy_kd(catalogue: Catalogue, index: int, games: int, seed: int,
              config: ExperimentConfig, arena: ArenaConfig = DEFAULT_ARENA) -> float:
    """Mean per-game KD of a frozen, fully greedy milestone against the training opponent."""
    cfg = replace(config.learner_config(), epsilon=0.0)
    total = 0.0
    for g in range(games):
        learner = SarsaLambdaLearner(load_milestone(catalogue, index), cfg, DEFAULT_DISCRETIZER,
                                     learning=False)
        result = run_game(config.game_ticks, learner, PROFILES[config.train_level],
                          rng=game_rng(seed, "greedy", index, g), cfg=arena)
        total += result.log.kd_ratio
    return total / games
