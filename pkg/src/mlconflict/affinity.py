"""Ideal-point similarity and mutual k-nearest-neighbour sparsification."""
from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from mlconflict import DataError


def distance_to_similarity(dist: np.ndarray) -> np.ndarray:
    """S = 1 - D / max(D) with a zero diagonal.

    A matrix of all-zero distances maps to ones off the diagonal.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    off = ~np.eye(n, dtype=bool)
    dmax = dist[off].max() if n > 1 else 0.0
    if dmax <= 0:
        sim = np.ones_like(dist)
    else:
        sim = 1.0 - dist / dmax
    np.fill_diagonal(sim, 0.0)
    return sim


def ideal_similarity_matrix(
    points: Mapping[int, Mapping[str, float]], year: int
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Entities, absolute ideal-point distances and similarities for one year."""
    table = points.get(year, {})
    if len(table) < 2:
        raise DataError(f"year {year}: need at least 2 entities with ideal points, got {len(table)}")
    entities = sorted(table)
    x = np.array([table[e] for e in entities], dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError(f"year {year}: non-finite ideal point")
    dist = np.abs(x[:, None] - x[None, :])
    return entities, dist, distance_to_similarity(dist)


def knn_sets(sim: np.ndarray, k: int, entities: Sequence[str] | None = None) -> list[set[int]]:
    """Indices of the k most similar positive-similarity neighbours of each row.

    Ties are resolved by entity identifier (or index when none given).
    """
    sim = np.asarray(sim, dtype=float)
    n = sim.shape[0]
    if entities is None:
        order_key = np.arange(n)
    else:
        order_key = np.argsort(np.argsort(np.asarray(entities, dtype=object)))
    out = []
    for i in range(n):
        cand = np.array([j for j in range(n) if j != i and sim[i, j] > 0], dtype=int)
        if cand.size == 0:
            out.append(set())
            continue
        # lexsort: last key is primary
        order = np.lexsort((order_key[cand], -sim[i, cand]))
        out.append(set(cand[order[:k]].tolist()))
    return out


def mutual_knn(sim: np.ndarray, k: int = 5, entities: Sequence[str] | None = None) -> np.ndarray:
    """Edge (i, j) iff each is among the other's k most similar vertices."""
    n = np.asarray(sim).shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n > 1 and k >= n:
        raise ValueError(f"k={k} must be smaller than the number of vertices ({n})")
    nbrs = knn_sets(sim, k, entities)
    adj = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        for j in nbrs[i]:
            if i in nbrs[j]:
                adj[i, j] = adj[j, i] = 1
    return adj
