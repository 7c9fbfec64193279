"""Line-oriented text formats for Q-tables and catalogues.

A Q-table file is a short tab-separated header followed by one record per
nonzero value, sorted by (state ordinal, action ordinal)::

    sec-qtable	1
    buckets	4	8	8	5
    actions	5	3
    discretizer	0.1,0.75,1.5	8	8	12.0,17.0,22.0,28.0
    entries	2
    checksum	<fnv1a-64 of the body, 16 hex digits>
    ---
    0	3	0	1	7	12.5
    ...

Values use 17 significant digits, which round-trips any double exactly;
bucket edges use the shortest exact repr.
A catalogue directory holds ``manifest.tsv`` plus ``milestone_<i>.qt``.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .catalogue import Catalogue, Milestone
from .errors import (ChecksumError, FormatVersionError, MissingCatalogueFileError,
                     NonContiguousIndexError, PersistenceError, StateSpaceMismatchError,
                     TruncatedFileError)
from .rl import H_SKEWS, N_ACTIONS, V_SKEWS, Discretizer, QTable

FORMAT_VERSION = 1
QTABLE_MAGIC = "sec-qtable"
MANIFEST_MAGIC = "sec-catalogue"
MANIFEST_NAME = "manifest.tsv"
BODY_MARK = "---"
FILE_MODE = 0o644

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def checksum_hex(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write to a sibling temp file, fsync, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, FILE_MODE)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _discretizer_fields(d: Discretizer) -> list[str]:
    return [",".join(map(repr, d.speed_edges)), str(d.direction_sectors),
            str(d.rotation_sectors), ",".join(map(repr, d.distance_edges))]


def _parse_discretizer(fields: list[str]) -> Discretizer:
    speed, direction, rotation, distance = fields
    return Discretizer(tuple(float(x) for x in speed.split(",")), int(direction), int(rotation),
                       tuple(float(x) for x in distance.split(",")))


def _key(ordinal: int, counts: tuple[int, ...]) -> tuple[int, int, int, int]:
    _, nd, nr, nx = counts
    ordinal, dist = divmod(ordinal, nx)
    ordinal, rot = divmod(ordinal, nr)
    speed, direction = divmod(ordinal, nd)
    return speed, direction, rot, dist


def _ordinal(key: tuple[int, ...], counts: tuple[int, ...]) -> int:
    _, nd, nr, nx = counts
    return ((key[0] * nd + key[1]) * nr + key[2]) * nx + key[3]


def _body(values, n_actions: int, counts: tuple[int, ...]) -> tuple[str, int]:
    lines = []
    for i, v in enumerate(values):
        if v != 0.0:
            s, a = divmod(i, n_actions)
            lines.append("\t".join(map(str, (*_key(s, counts), a))) + "\t" + _fmt(v) + "\n")
    return "".join(lines), len(lines)


def dumps_qtable(values, counts: tuple[int, ...], n_actions: int = N_ACTIONS,
                 discretizer: Discretizer | None = None) -> bytes:
    body, entries = _body(values, n_actions, counts)
    body_bytes = body.encode("ascii")
    header = [f"{QTABLE_MAGIC}\t{FORMAT_VERSION}",
              "buckets\t" + "\t".join(map(str, counts)),
              f"actions\t{len(H_SKEWS)}\t{len(V_SKEWS)}"]
    if discretizer is not None:
        header.append("discretizer\t" + "\t".join(_discretizer_fields(discretizer)))
    header += [f"entries\t{entries}", f"checksum\t{checksum_hex(body_bytes)}", BODY_MARK]
    return ("\n".join(header) + "\n").encode("ascii") + body_bytes


def write_qtable(q: QTable, path: str | os.PathLike, discretizer: Discretizer | None = None) -> str:
    """Atomically write ``q`` (values only, never traces); returns the body checksum."""
    if discretizer is not None and discretizer.bucket_counts != q.bucket_counts:
        raise StateSpaceMismatchError("discretizer does not match the table's bucket counts")
    data = dumps_qtable(q.values, q.bucket_counts, q.n_actions, discretizer)
    atomic_write_bytes(path, data)
    return _header_checksum(data)


def _header_checksum(data: bytes) -> str:
    for line in data.split(b"\n"):
        if line.startswith(b"checksum\t"):
            return line.split(b"\t")[1].decode()
    raise PersistenceError("no checksum line")


class _Parsed:
    __slots__ = ("counts", "discretizer", "values", "checksum")


def _parse_qtable(data: bytes, path) -> _Parsed:
    mark = ("\n" + BODY_MARK + "\n").encode()
    cut = data.find(mark)
    if cut < 0:
        first = data.split(b"\n", 1)[0].decode("ascii", "replace").split("\t")
        if first[0] != QTABLE_MAGIC:
            raise PersistenceError(f"{path}: not a Q-table file")
        if len(first) > 1 and first[1] != str(FORMAT_VERSION):
            raise FormatVersionError(f"{path}: format version {first[1]}, expected {FORMAT_VERSION}")
        raise TruncatedFileError(f"{path}: header ends before the body marker")
    header = [line.split("\t") for line in data[:cut].decode("ascii").split("\n")]
    body = data[cut + len(mark):]
    if header[0][0] != QTABLE_MAGIC:
        raise PersistenceError(f"{path}: not a Q-table file")
    if header[0][1:] != [str(FORMAT_VERSION)]:
        raise FormatVersionError(f"{path}: format version {header[0][1:]}, expected {FORMAT_VERSION}")
    fields = {row[0]: row[1:] for row in header[1:]}
    try:
        counts = tuple(int(x) for x in fields["buckets"])
        grid = tuple(int(x) for x in fields["actions"])
        entries = int(fields["entries"][0])
        expected = fields["checksum"][0]
    except (KeyError, IndexError, ValueError) as exc:
        raise PersistenceError(f"{path}: malformed header ({exc})") from None
    if len(counts) != 4 or grid != (len(H_SKEWS), len(V_SKEWS)):
        raise StateSpaceMismatchError(f"{path}: buckets {counts}, action grid {grid}")
    lines = body.split(b"\n")
    if lines[-1] != b"":
        raise TruncatedFileError(f"{path}: last record is incomplete")
    lines.pop()
    if len(lines) < entries:
        raise TruncatedFileError(f"{path}: {len(lines)} of {entries} records present")
    if len(lines) > entries:
        raise PersistenceError(f"{path}: {len(lines) - entries} records beyond the declared count")
    actual = checksum_hex(body)
    if actual != expected:
        raise ChecksumError(path, expected, actual)
    n_states = counts[0] * counts[1] * counts[2] * counts[3]
    values = [0.0] * (n_states * N_ACTIONS)
    for line in lines:
        *key, a, v = line.split(b"\t")
        key = tuple(int(k) for k in key)
        a = int(a)
        if any(not 0 <= k < c for k, c in zip(key, counts)) or not 0 <= a < N_ACTIONS:
            raise StateSpaceMismatchError(f"{path}: record {key}/{a} outside the state space")
        values[_ordinal(key, counts) * N_ACTIONS + a] = float(v)
    parsed = _Parsed()
    parsed.counts = counts
    parsed.discretizer = _parse_discretizer(fields["discretizer"]) if "discretizer" in fields else None
    parsed.values = values
    parsed.checksum = actual
    return parsed


def _check_space(parsed: _Parsed, discretizer: Discretizer | None, path) -> None:
    if discretizer is None:
        return
    if parsed.counts != discretizer.bucket_counts:
        raise StateSpaceMismatchError(
            f"{path}: buckets {parsed.counts} but discretizer has {discretizer.bucket_counts}")
    if parsed.discretizer is not None and parsed.discretizer != discretizer:
        raise StateSpaceMismatchError(f"{path}: bucket edges differ from the expected discretizer")


def read_qtable(path: str | os.PathLike, discretizer: Discretizer | None = None) -> QTable:
    """Read a Q-table file; passing ``discretizer`` rejects a mismatched state space."""
    parsed = _parse_qtable(Path(path).read_bytes(), path)
    _check_space(parsed, discretizer, path)
    n_states = len(parsed.values) // N_ACTIONS
    return QTable(n_states, N_ACTIONS, parsed.values, bucket_counts=parsed.counts)


def milestone_filename(index: int) -> str:
    return f"milestone_{index}.qt"


def save_catalogue(catalogue: Catalogue, directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in catalogue.milestones:
        name = milestone_filename(m.index)
        data = dumps_qtable(m.snapshot, catalogue.bucket_counts, catalogue.n_actions, catalogue.discretizer)
        atomic_write_bytes(directory / name, data)
        rows.append(f"{m.index}\t{name}\t{m.deaths_at_capture}\t{_header_checksum(data)}")
    manifest = [f"{MANIFEST_MAGIC}\t{FORMAT_VERSION}",
                f"interval\t{catalogue.interval}",
                "discretizer\t" + "\t".join(_discretizer_fields(catalogue.discretizer)),
                f"milestones\t{len(rows)}",
                "index\tfile\tdeaths_at_capture\tchecksum",
                *rows]
    # the manifest goes last so a complete manifest implies complete milestone files
    atomic_write_text(directory / MANIFEST_NAME, "\n".join(manifest) + "\n")
    return directory


def load_catalogue(directory: str | os.PathLike) -> Catalogue:
    """Load and verify every milestone listed in the manifest."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingCatalogueFileError(manifest_path)
    text = manifest_path.read_text("ascii")
    if not text.endswith("\n"):
        raise TruncatedFileError(f"{manifest_path}: incomplete last line")
    lines = [line.split("\t") for line in text.rstrip("\n").split("\n")]
    if lines[0][0] != MANIFEST_MAGIC:
        raise PersistenceError(f"{manifest_path}: not a catalogue manifest")
    if lines[0][1:] != [str(FORMAT_VERSION)]:
        raise FormatVersionError(f"{manifest_path}: format version {lines[0][1:]}")
    try:
        interval = int(lines[1][1])
        discretizer = _parse_discretizer(lines[2][1:])
        count = int(lines[3][1])
    except (IndexError, ValueError) as exc:
        raise PersistenceError(f"{manifest_path}: malformed header ({exc})") from None
    rows = lines[5:]
    if len(rows) != count:
        raise TruncatedFileError(f"{manifest_path}: {len(rows)} of {count} milestone rows present")
    indices = [int(r[0]) for r in rows]
    if indices != list(range(count)):
        raise NonContiguousIndexError(f"{manifest_path}: milestone indices {indices} are not 0..{count - 1}")
    milestones = []
    for index, name, deaths, expected in rows:
        path = directory / name
        if not path.is_file():
            raise MissingCatalogueFileError(path)
        parsed = _parse_qtable(path.read_bytes(), path)
        if parsed.checksum != expected:
            raise ChecksumError(path, expected, parsed.checksum)
        _check_space(parsed, discretizer, path)
        milestones.append(Milestone(int(index), int(deaths), tuple(parsed.values)))
    return Catalogue(milestones, interval, discretizer)
