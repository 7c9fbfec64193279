"""Consistency checks over a results directory (the ``verify`` command)."""
from __future__ import annotations

import os
from collections import defaultdict
from pathlib import Path
from typing import Callable

from .errors import SecError
from .experiments import LEVELS, MODES, read_csv
from .persistence import load_catalogue


def _check_catalogues(results: Path) -> str | None:
    dirs = sorted(results.glob("seed*/catalogue"))
    if not dirs:
        return "no catalogues found"
    for d in dirs:
        cat = load_catalogue(d)
        if any(cat[0].snapshot):
            return f"{d}: milestone 0 is not empty"
        deaths = [m.deaths_at_capture for m in cat.milestones]
        if any(b <= a for a, b in zip(deaths, deaths[1:])):
            return f"{d}: deaths_at_capture not strictly increasing"
        if any(x % cat.interval for x in deaths):
            return f"{d}: capture not at a multiple of the interval"
    return None


def _check_outcomes(results: Path) -> str | None:
    found = False
    for mode in MODES:
        for lv in LEVELS:
            path = results / f"eval_{mode}_level{lv}.csv"
            if not path.is_file():
                continue
            found = True
            rows = read_csv(path)
            tally = defaultdict(int)
            for r in rows:
                k, d = int(r["kills"]), int(r["deaths"])
                expect = "win" if k > d else "lose" if k < d else "draw"
                if r["outcome"] != expect:
                    return f"{path}: seed {r['seed']} game {r['game']} outcome {r['outcome']} != {expect}"
                tally[r["outcome"]] += 1
            if sum(tally.values()) != len(rows):
                return f"{path}: win+lose+draw != games"
    return None if found else "no evaluation results found"


def _check_incidents(results: Path) -> str | None:
    for mode in MODES:
        for lv in LEVELS:
            path = results / f"incidents_{mode}_level{lv}.csv"
            if not path.is_file():
                continue
            finals = {}
            last = {}
            for r in read_csv(path):
                key = (r["seed"], r["game"])
                kills, deaths = int(r["learner_kills"]), int(r["learner_deaths"])
                pk, pd, ptick, pevent = last.get(key, (0, 0, -1, "death"))
                if kills < pk or deaths < pd:
                    return f"{path}: running counts decrease in game {key}"
                if r["event"].startswith(("milestone", "policy")) and (int(r["tick"]) != ptick
                                                                       or pevent not in ("kill", "death")):
                    return f"{path}: {r['event']} at tick {r['tick']} is not attached to an incident"
                if r["event"].startswith(("milestone", "policy")) and mode != "sec":
                    return f"{path}: balancer event in a run without a balancer"
                last[key] = (kills, deaths, int(r["tick"]), r["event"])
                finals[key] = (kills, deaths)
            games = results / f"eval_{mode}_level{lv}.csv"
            if games.is_file():
                for r in read_csv(games):
                    got = finals.get((r["seed"], r["game"]), (0, 0))
                    if got != (int(r["kills"]), int(r["deaths"])):
                        return f"{path}: incident totals {got} disagree with {games.name}"
    return None


def _check_hashes(results: Path) -> str | None:
    hashes = set()
    for path in sorted(results.glob("*.csv")):
        hashes |= {r["config_hash"] for r in read_csv(path)}
    if len(hashes) > 1:
        return f"results mix configurations: {', '.join(sorted(hashes))}"
    return None


CHECKS: list[tuple[str, Callable[[Path], str | None]]] = [
    ("catalogues load and verify", _check_catalogues),
    ("outcomes match kill counts", _check_outcomes),
    ("incident logs are consistent", _check_incidents),
    ("single configuration hash", _check_hashes),
]


def verify_results(results: str | os.PathLike, echo=print) -> bool:
    results = Path(results)
    ok = True
    for name, check in CHECKS:
        try:
            problem = check(results)
        except (SecError, OSError, KeyError, ValueError) as exc:
            problem = f"{type(exc).__name__}: {exc}"
        ok &= problem is None
        echo(f"{'PASS' if problem is None else 'FAIL'}  {name}" + (f": {problem}" if problem else ""))
    return ok
