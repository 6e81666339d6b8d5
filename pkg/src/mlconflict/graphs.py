"""Yearly multilayer graphs, moving-window treaty layers and community projection."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from mlconflict import DataError

# Inclusive window [t - WINDOW_LENGTH + 1, t]; edges dissipate outside it.
WINDOW_LENGTH = 10


def _check_adjacency(adj: np.ndarray, n: int, name: str) -> np.ndarray:
    adj = np.asarray(adj)
    if adj.shape != (n, n):
        raise DataError(f"layer {name!r}: shape {adj.shape} does not match {n} vertices")
    if not np.array_equal(adj, adj.T):
        raise DataError(f"layer {name!r}: adjacency is not symmetric")
    if np.any(np.diag(adj) != 0):
        raise DataError(f"layer {name!r}: nonzero diagonal")
    if not np.isin(adj, (0, 1)).all():
        raise DataError(f"layer {name!r}: adjacency is not binary")
    return adj.astype(np.int8)


@dataclass(frozen=True)
class MultilayerGraph:
    """One year's aligned vertex set with k undirected binary layers."""

    year: int
    vertices: tuple[str, ...]
    layers: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        vertices = tuple(self.vertices)
        if len(set(vertices)) != len(vertices):
            raise DataError("duplicate vertex identifiers")
        names = [name for name, _ in self.layers]
        if len(set(names)) != len(names):
            raise DataError("layer names must be unique")
        checked = []
        for name, adj in self.layers:
            adj = _check_adjacency(adj, len(vertices), name)
            adj.setflags(write=False)
            checked.append((name, adj))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "layers", tuple(checked))

    @property
    def layer_names(self) -> list[str]:
        return [name for name, _ in self.layers]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def stack(self) -> np.ndarray:
        """Adjacencies as a (k, n, n) float array."""
        n = len(self.vertices)
        if not self.layers:
            return np.zeros((0, n, n))
        return np.stack([adj for _, adj in self.layers]).astype(float)

    def layer(self, name: str) -> np.ndarray:
        for lname, adj in self.layers:
            if lname == name:
                return adj
        raise KeyError(name)

    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}


@dataclass(frozen=True)
class GraphSequence:
    graphs: tuple[MultilayerGraph, ...]

    def __post_init__(self):
        years = [g.year for g in self.graphs]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise DataError("graph years must be strictly increasing")
        if any(b != a + 1 for a, b in zip(years, years[1:])):
            raise DataError("graph years must be contiguous")
        object.__setattr__(self, "graphs", tuple(self.graphs))

    @property
    def years(self) -> list[int]:
        return [g.year for g in self.graphs]

    def __getitem__(self, year: int) -> MultilayerGraph:
        for g in self.graphs:
            if g.year == year:
                return g
        raise KeyError(year)

    def __iter__(self):
        return iter(self.graphs)

    def __len__(self):
        return len(self.graphs)


@dataclass(frozen=True)
class Community:
    vertices: frozenset[str]
    layers: frozenset[str]
    score: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "vertices", frozenset(self.vertices))
        object.__setattr__(self, "layers", frozenset(self.layers))
        if len(self.vertices) < 2:
            raise DataError("a community needs at least 2 vertices")
        if not self.layers:
            raise DataError("a community needs at least one layer")

    def to_dict(self) -> dict:
        return {
            "vertices": sorted(self.vertices),
            "layers": sorted(self.layers),
            "score": float(self.score),
        }


@dataclass(frozen=True)
class CommunitySet:
    year: int
    communities: tuple[Community, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "communities", tuple(self.communities))

    def __len__(self):
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    def members(self) -> set[str]:
        out: set[str] = set()
        for c in self.communities:
            out |= c.vertices
        return out

    def to_dict(self) -> dict:
        return {"year": self.year, "communities": [c.to_dict() for c in self.communities]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CommunitySet":
        return cls(
            int(d["year"]),
            tuple(Community(c["vertices"], c["layers"], c.get("score", 0.0)) for c in d["communities"]),
        )


@dataclass(frozen=True)
class ProjectedGraph:
    year: int
    vertices: tuple[str, ...]
    weights: np.ndarray


def build_window_layer(
    events: Iterable[tuple[str, str, int]],
    target_year: int,
    window_length: int = WINDOW_LENGTH,
    vertices: Sequence[str] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Binary adjacency of dyads with an event in ``[target_year - window_length + 1, target_year]``.

    Events after ``target_year`` or before the window are ignored, as are
    self-events. When ``vertices`` is omitted the vertex set is the sorted
    union of participants of events inside the window.
    """
    if window_length < 1:
        raise ValueError("window_length must be >= 1")
    lo = target_year - window_length + 1
    pairs = set()
    for row, (a, b, year) in enumerate(events, start=1):
        if not a or not b:
            raise DataError(f"event {row}: empty entity identifier")
        if a == b or not (lo <= int(year) <= target_year):
            continue
        pairs.add((a, b) if a < b else (b, a))
    if vertices is None:
        vertices = sorted({v for p in pairs for v in p})
    else:
        vertices = list(vertices)
    idx = {v: i for i, v in enumerate(vertices)}
    adj = np.zeros((len(vertices), len(vertices)), dtype=np.int8)
    for a, b in pairs:
        if a in idx and b in idx:
            adj[idx[a], idx[b]] = adj[idx[b], idx[a]] = 1
    return vertices, adj


def align_layers(
    layers: Mapping[str, tuple[Sequence[str], np.ndarray]] | Sequence[tuple[str, Sequence[str], np.ndarray]],
    year: int = 0,
    policy: str = "union",
) -> MultilayerGraph:
    """Put named layers over possibly different vertex sets onto one sorted vertex ordering."""
    if isinstance(layers, Mapping):
        items = [(name, vs, adj) for name, (vs, adj) in layers.items()]
    else:
        items = list(layers)
    if not items:
        raise DataError("align_layers needs at least one layer")
    sets = [set(vs) for _, vs, _ in items]
    if policy == "union":
        keep = set().union(*sets)
    elif policy == "intersection":
        keep = set.intersection(*sets)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    if not keep:
        raise DataError("empty vertex set after alignment")
    vertices = sorted(keep)
    idx = {v: i for i, v in enumerate(vertices)}
    out = []
    for name, vs, adj in items:
        adj = np.asarray(adj)
        src = [i for i, v in enumerate(vs) if v in idx]
        dst = [idx[vs[i]] for i in src]
        aligned = np.zeros((len(vertices), len(vertices)), dtype=np.int8)
        aligned[np.ix_(dst, dst)] = adj[np.ix_(src, src)]
        out.append((name, aligned))
    return MultilayerGraph(year, tuple(vertices), tuple(out))


def project_communities(cs: CommunitySet, vertices: Sequence[str] | None = None) -> ProjectedGraph:
    """Single-mode graph weighted by the number of shared communities."""
    if vertices is None:
        vertices = sorted(cs.members())
    vertices = tuple(vertices)
    idx = {v: i for i, v in enumerate(vertices)}
    w = np.zeros((len(vertices), len(vertices)), dtype=np.int64)
    for c in cs.communities:
        members = [idx[v] for v in c.vertices if v in idx]
        ind = np.zeros(len(vertices), dtype=np.int64)
        ind[members] = 1
        w += np.outer(ind, ind)
    np.fill_diagonal(w, 0)
    return ProjectedGraph(cs.year, vertices, w)
