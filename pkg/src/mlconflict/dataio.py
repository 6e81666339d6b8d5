"""Readers and writers for the CSV, JSON and text formats used by the pipeline."""
from __future__ import annotations

import csv
import io
import json
import logging
import re
import warnings
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from mlconflict import DataError
from mlconflict.graphs import CommunitySet

log = logging.getLogger(__name__)

EVENT_HEADER = ("entity_a", "entity_b", "year", "layer")
EDGE_HEADER = ("year", "layer", "entity_a", "entity_b")
IDEAL_HEADER = ("entity", "year", "ideal_point")
CONFLICT_HEADER = ("entity_a", "entity_b", "year", "hostility_level")
NODAL_HEADER = ("entity", "year", "value")
DYADIC_HEADER = ("entity_a", "entity_b", "year", "value")
MEMBER_HEADER = ("entity", "year")
POLARITY_HEADER = ("year", "n_communities", "pct_assigned", "pct_bridges")
PREDICT_HEADER = ("test_year", "aucpr", "baseline")
GOF_HEADER = ("year", "bin", "observed", "min", "q25", "median", "q75", "max")
COEF_HEADER = ("term", "estimate", "ci_lo", "ci_hi", "significant")

SPEECH_RE = re.compile(r"^(?P<entity>[^_]+)_(?P<session>[^_]+)_(?P<year>-?\d+)\.txt$")


def read_text(path) -> str:
    """Strict UTF-8 read; decoding errors name the byte offset and line."""
    raw = Path(path).read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise DataError(f"{path}: invalid UTF-8 at byte {exc.start} (line {line})") from None


def read_rows(path, header: Sequence[str]) -> list[tuple[int, dict]]:
    """(line number, row) pairs of a CSV whose header must contain ``header``."""
    text = read_text(path)
    reader = csv.DictReader(io.StringIO(text, newline=""))
    missing = [h for h in header if h not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{path}: missing columns {missing}; expected header {','.join(header)}")
    return [(reader.line_num, row) for row in reader]


def _int(value, path, line, col) -> int:
    try:
        return int(str(value).strip())
    except (TypeError, ValueError):
        raise DataError(f"{path}:{line}: column {col!r} is not an integer: {value!r}") from None


def _float(value, path, line, col) -> float:
    try:
        return float(str(value).strip())
    except (TypeError, ValueError):
        raise DataError(f"{path}:{line}: column {col!r} is not a number: {value!r}") from None


def _entity(value, path, line, col) -> str:
    if value is None or not str(value):
        raise DataError(f"{path}:{line}: empty {col}")
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


# treaty events and edge lists

def read_events(path, category_map: Mapping[str, str] | None = None) -> list[tuple[str, str, int, str]]:
    out = []
    for line, row in read_rows(path, EVENT_HEADER):
        a = _entity(row["entity_a"], path, line, "entity_a")
        b = _entity(row["entity_b"], path, line, "entity_b")
        year = _int(row["year"], path, line, "year")
        layer = _entity(row["layer"], path, line, "layer")
        if category_map:
            layer = category_map.get(layer, layer)
        out.append((a, b, year, layer))
    return out


def write_events(path, events: Iterable[tuple[str, str, int, str]]) -> None:
    write_csv(path, EVENT_HEADER, events)


def write_edges(path, rows: Iterable[tuple[int, str, str, str]]) -> None:
    write_csv(path, EDGE_HEADER, sorted(rows))


def adjacency_edges(year: int, layer: str, vertices: Sequence[str], adj: np.ndarray):
    iu = np.triu_indices(len(vertices), 1)
    for i, j in zip(*iu):
        if adj[i, j]:
            a, b = vertices[i], vertices[j]
            yield (year, layer, *sorted((a, b)))


def read_edges(path) -> dict[int, dict[str, set[tuple[str, str]]]]:
    out: dict[int, dict[str, set]] = defaultdict(lambda: defaultdict(set))
    for line, row in read_rows(path, EDGE_HEADER):
        year = _int(row["year"], path, line, "year")
        a = _entity(row["entity_a"], path, line, "entity_a")
        b = _entity(row["entity_b"], path, line, "entity_b")
        out[year][row["layer"]].add(tuple(sorted((a, b))))
    return {y: dict(d) for y, d in out.items()}


# ideal points

def read_ideal_points(path) -> dict[int, dict[str, float]]:
    out: dict[int, dict[str, float]] = defaultdict(dict)
    for line, row in read_rows(path, IDEAL_HEADER):
        e = _entity(row["entity"], path, line, "entity")
        y = _int(row["year"], path, line, "year")
        x = _float(row["ideal_point"], path, line, "ideal_point")
        if not np.isfinite(x):
            raise DataError(f"{path}:{line}: non-finite ideal point")
        if e in out[y]:
            raise DataError(f"{path}:{line}: duplicate ideal point for {e} in {y}")
        out[y][e] = x
    return dict(out)


def write_ideal_points(path, points: Mapping[int, Mapping[str, float]]) -> None:
    write_csv(path, IDEAL_HEADER, ((e, y, x) for y in sorted(points) for e, x in sorted(points[y].items())))


# conflict

def read_conflict_rows(path) -> list[tuple[str, str, int, int]]:
    out = []
    for line, row in read_rows(path, CONFLICT_HEADER):
        level = _int(row["hostility_level"], path, line, "hostility_level")
        if not 1 <= level <= 5:
            raise DataError(f"{path}:{line}: hostility level {level} outside 1-5")
        out.append(
            (
                _entity(row["entity_a"], path, line, "entity_a"),
                _entity(row["entity_b"], path, line, "entity_b"),
                _int(row["year"], path, line, "year"),
                level,
            )
        )
    return out


def conflict_network(rows, year: int, vertices: Sequence[str] | None = None, levels=(4, 5)):
    """Undirected onset network: tie iff a dispute at one of ``levels`` began in ``year``."""
    pairs = {tuple(sorted((a, b))) for a, b, y, lvl in rows if y == year and lvl in levels and a != b}
    if vertices is None:
        vertices = sorted({v for p in pairs for v in p})
    idx = {v: i for i, v in enumerate(vertices)}
    adj = np.zeros((len(vertices), len(vertices)), dtype=np.int8)
    for a, b in pairs:
        if a in idx and b in idx:
            adj[idx[a], idx[b]] = adj[idx[b], idx[a]] = 1
    return list(vertices), adj


def load_conflict_network(path, year: int, vertices: Sequence[str] | None = None):
    return conflict_network(read_conflict_rows(path), year, vertices)


def write_conflict_rows(path, rows) -> None:
    write_csv(path, CONFLICT_HEADER, rows)


# covariates

def read_nodal(path) -> dict[int, dict[str, float]]:
    out: dict[int, dict[str, float]] = defaultdict(dict)
    for line, row in read_rows(path, NODAL_HEADER):
        out[_int(row["year"], path, line, "year")][_entity(row["entity"], path, line, "entity")] = _float(
            row["value"], path, line, "value"
        )
    return dict(out)


def write_nodal(path, table: Mapping[int, Mapping[str, float]]) -> None:
    write_csv(path, NODAL_HEADER, ((e, y, v) for y in sorted(table) for e, v in sorted(table[y].items())))


def read_dyadic(path) -> dict[int, dict[tuple[str, str], float]]:
    """Directed cell map year -> (a, b) -> value, as written."""
    out: dict[int, dict] = defaultdict(dict)
    for line, row in read_rows(path, DYADIC_HEADER):
        a = _entity(row["entity_a"], path, line, "entity_a")
        b = _entity(row["entity_b"], path, line, "entity_b")
        out[_int(row["year"], path, line, "year")][(a, b)] = _float(row["value"], path, line, "value")
    return dict(out)


def write_dyadic(path, table: Mapping[int, Mapping[tuple[str, str], float]]) -> None:
    write_csv(
        path,
        DYADIC_HEADER,
        ((a, b, y, v) for y in sorted(table) for (a, b), v in sorted(table[y].items())),
    )


def symmetrize_dyadic(cells: Mapping[tuple[str, str], float], vertices: Sequence[str], how: str = "max") -> np.ndarray:
    """Dense symmetric matrix; absent cells are 0, both directions combined by max or min."""
    if how not in ("max", "min"):
        raise ValueError(f"unknown symmetrization {how!r}")
    idx = {v: i for i, v in enumerate(vertices)}
    n = len(vertices)
    fwd = np.full((n, n), np.nan)
    for (a, b), v in cells.items():
        if a in idx and b in idx and a != b:
            fwd[idx[a], idx[b]] = v
    both = np.stack([fwd, fwd.T])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        combined = np.nanmax(both, axis=0) if how == "max" else np.nanmin(both, axis=0)
    out = np.nan_to_num(combined, nan=0.0)
    np.fill_diagonal(out, 0.0)
    return out


def matrix_to_dyadic(year: int, vertices: Sequence[str], m: np.ndarray) -> dict[tuple[str, str], float]:
    iu = np.triu_indices(len(vertices), 1)
    return {(vertices[i], vertices[j]): float(m[i, j]) for i, j in zip(*iu) if m[i, j] != 0}


def read_members(path) -> dict[int, list[str]]:
    out: dict[int, set] = defaultdict(set)
    for line, row in read_rows(path, MEMBER_HEADER):
        out[_int(row["year"], path, line, "year")].add(_entity(row["entity"], path, line, "entity"))
    return {y: sorted(v) for y, v in out.items()}


# speeches

def speech_files(directory) -> list[tuple[str, str, int, Path]]:
    """(entity, session, year, path) for every ``<ENTITY>_<SESSION>_<YEAR>.txt`` file."""
    out = []
    for p in sorted(Path(directory).iterdir()):
        if p.suffix != ".txt":
            continue
        m = SPEECH_RE.match(p.name)
        if not m:
            raise DataError(f"{p}: speech file name must be <ENTITY>_<SESSION>_<YEAR>.txt")
        out.append((m["entity"], m["session"], int(m["year"]), p))
    return out


def read_speeches(directory) -> list[tuple[tuple[str, int], str]]:
    """Documents keyed by (entity, year); several sessions in one year are concatenated."""
    docs: dict[tuple[str, int], list[str]] = defaultdict(list)
    for entity, _session, year, p in speech_files(directory):
        docs[(entity, year)].append(read_text(p))
    return [(k, "\n".join(v)) for k, v in sorted(docs.items())]


def write_speech(directory, entity: str, session: str, year: int, text: str) -> Path:
    p = Path(directory) / f"{entity}_{session}_{year}.txt"
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    return p


# matrices, communities, reports

def write_matrix(path, entities: Sequence[str], m: np.ndarray) -> None:
    write_csv(path, ["", *entities], ([e, *row] for e, row in zip(entities, m.tolist())))


def read_matrix(path) -> tuple[list[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(read_text(path), newline="")))
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    cols = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    if names != cols:
        raise DataError(f"{path}: row and column labels differ")
    try:
        m = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return names, m.reshape(len(names), len(names))


def write_communities(path, series: Mapping[int, CommunitySet]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {str(y): [c.to_dict() for c in series[y].communities] for y in sorted(series)}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_communities(path) -> dict[int, CommunitySet]:
    try:
        payload = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    return {int(y): CommunitySet.from_dict({"year": y, "communities": cs}) for y, cs in payload.items()}


def write_polarity(path, reports) -> None:
    write_csv(path, POLARITY_HEADER, ((r.year, r.n_communities, r.pct_assigned, r.pct_bridges) for r in reports))


def read_polarity(path) -> list[dict]:
    return [
        {
            "year": _int(r["year"], path, ln, "year"),
            "n_communities": _float(r["n_communities"], path, ln, "n_communities"),
            "pct_assigned": _float(r["pct_assigned"], path, ln, "pct_assigned"),
            "pct_bridges": _float(r["pct_bridges"], path, ln, "pct_bridges"),
        }
        for ln, r in read_rows(path, POLARITY_HEADER)
    ]


def near_miss_ids(ids: Iterable[str]) -> list[tuple[str, str]]:
    """Pairs of distinct identifiers equal up to case and surrounding whitespace."""
    groups: dict[str, set[str]] = defaultdict(set)
    for i in ids:
        groups[i.strip().casefold()].add(i)
    pairs = []
    for variants in groups.values():
        v = sorted(variants)
        pairs += [(a, b) for k, a in enumerate(v) for b in v[k + 1 :]]
    for a, b in pairs:
        log.warning("identifiers %r and %r differ only by case or whitespace", a, b)
    return pairs
