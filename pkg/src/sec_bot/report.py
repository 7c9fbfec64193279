"""CSV summaries and SVG line charts rendered from a results directory."""
from __future__ import annotations

import io
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import MissingResultsError  # noqa: E402
from .experiments import LEVELS, MODES, QUARTILE_COLUMNS, read_csv, write_csv  # noqa: E402
from .persistence import atomic_write_bytes  # noqa: E402
from .stats import kd_ratio  # noqa: E402

TRACE_LEVEL = 3
SUMMARY_COLUMNS = ("config_hash", "seeds", "mode", "level", "games", "wins", "losses", "draws",
                   "kills", "deaths", "kd_ratio", "adjustments_up", "adjustments_down", "clearances",
                   "max_index")
SVG_SALT = "sec-bot"


def expected_files(results: Path) -> list[Path]:
    files = [results / "training_games.csv", results / "training_quartiles.csv"]
    files += [results / f"eval_{m}_level{lv}.csv" for m in MODES for lv in LEVELS]
    files += [results / f"incidents_{m}_level{TRACE_LEVEL}.csv" for m in MODES]
    return files


def kd_trace(incident_rows: list[dict[str, str]]) -> list[float]:
    """Running KD ratio after each kill/death, accumulated across games in file order."""
    kills = deaths = 0
    trace = []
    for row in incident_rows:
        if row["event"] == "kill":
            kills += 1
        elif row["event"] == "death":
            deaths += 1
        else:
            continue
        trace.append(kd_ratio(kills, deaths))
    return trace


def _stamp(rows: list[dict[str, str]]) -> tuple[str, str]:
    hashes = sorted({r["config_hash"] for r in rows})
    seeds = sorted({int(r["seed"]) for r in rows})
    return ",".join(hashes), ",".join(map(str, seeds))


def _save(fig, path: Path, title: str, stamp: tuple[str, str]) -> None:
    fig.suptitle(f"{title}\nconfig {stamp[0]} seeds {stamp[1]}", fontsize=9)
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        buf = io.BytesIO()
        fig.savefig(buf, format="svg",
                    metadata={"Date": None, "Description": f"config {stamp[0]} seeds {stamp[1]}"})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def _training_chart(rows, path: Path) -> None:
    seeds = sorted({int(r["seed"]) for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    for seed in seeds:
        mine = [r for r in rows if int(r["seed"]) == seed]
        games = [int(r["game"]) + 1 for r in mine]
        wins = losses = 0
        cw, cl = [], []
        for r in mine:
            wins += r["outcome"] == "win"
            losses += r["outcome"] == "lose"
            cw.append(wins)
            cl.append(losses)
        ax.plot(games, cw, label=f"wins, seed {seed}")
        ax.plot(games, cl, linestyle="--", label=f"losses, seed {seed}")
    ax.set_xlabel("training game")
    ax.set_ylabel("cumulative games")
    ax.legend(fontsize=7)
    _save(fig, path, "Training wins and losses", _stamp(rows))


def _killed_chart(rows, level: int, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = list(range(1, len(rows) + 1))
    ax.plot(x, [int(r["kills"]) for r in rows], marker="o", label="killed")
    ax.plot(x, [int(r["deaths"]) for r in rows], marker="s", label="was killed")
    ax.set_xlabel("game (seed-major order)")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    _save(fig, path, f"Balanced learner vs level {level}", _stamp(rows))


def _trace_chart(traces: dict[str, list[dict[str, str]]], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for mode, rows in traces.items():
        trace = kd_trace(rows)
        ax.plot(range(1, len(trace) + 1), trace, label=mode.replace("_", "-"))
    ax.axhline(1.0, color="grey", linewidth=0.8)
    ax.set_xlabel("incident")
    ax.set_ylabel("running KD ratio")
    ax.legend(fontsize=8)
    all_rows = [r for rows in traces.values() for r in rows]
    _save(fig, path, f"KD ratio by incident vs level {TRACE_LEVEL}", _stamp(all_rows))


def _summary_rows(results: Path) -> list[tuple]:
    out = []
    for mode in MODES:
        for lv in LEVELS:
            rows = read_csv(results / f"eval_{mode}_level{lv}.csv")
            outcomes = [r["outcome"] for r in rows]
            kills = sum(int(r["kills"]) for r in rows)
            deaths = sum(int(r["deaths"]) for r in rows)
            h, seeds = _stamp(rows)
            out.append((h, seeds, mode, lv, len(rows), outcomes.count("win"), outcomes.count("lose"),
                        outcomes.count("draw"), kills, deaths, kd_ratio(kills, deaths),
                        sum(int(r["adjustments_up"]) for r in rows),
                        sum(int(r["adjustments_down"]) for r in rows),
                        sum(int(r["clearances"]) for r in rows),
                        max((int(r["max_index"]) for r in rows), default=0)))
    return out


def build_report(results: str | os.PathLike) -> list[Path]:
    """Write summary CSVs and SVG charts under ``results/report``; returns the paths."""
    results = Path(results)
    missing = [p for p in expected_files(results) if not p.is_file()]
    if missing:
        raise MissingResultsError(missing)
    out = results / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "summary.csv"
    write_csv(path, SUMMARY_COLUMNS, _summary_rows(results))
    written.append(path)
    path = out / "training_quartiles.csv"
    rows = read_csv(results / "training_quartiles.csv")
    write_csv(path, QUARTILE_COLUMNS, [[r[c] for c in QUARTILE_COLUMNS] for r in rows])
    written.append(path)

    path = out / "training_win_loss.svg"
    _training_chart(read_csv(results / "training_games.csv"), path)
    written.append(path)
    for lv in LEVELS:
        path = out / f"killed_vs_was_killed_level{lv}.svg"
        _killed_chart(read_csv(results / f"eval_sec_level{lv}.csv"), lv, path)
        written.append(path)
    path = out / f"kd_trace_level{TRACE_LEVEL}.svg"
    _trace_chart({m: read_csv(results / f"incidents_{m}_level{TRACE_LEVEL}.csv") for m in MODES}, path)
    written.append(path)
    return written
