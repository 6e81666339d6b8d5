"""Relaxed Word Mover's Distance between speeches and yearly speech similarity."""
from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from mlconflict import DataError, NumericalError
from mlconflict.affinity import distance_to_similarity
from mlconflict.text.glove import EmbeddingSpace

log = logging.getLogger(__name__)

WMD_EXACT_MAX_VOCAB = 50


@dataclass(frozen=True)
class BowVector:
    doc_id: object
    weights: Mapping[str, float]

    def __post_init__(self):
        w = {t: float(m) for t, m in self.weights.items() if m > 0}
        if any(m < 0 for m in self.weights.values()):
            raise DataError(f"{self.doc_id}: negative mass")
        total = sum(w.values())
        if w and abs(total - 1.0) > 1e-9:
            raise DataError(f"{self.doc_id}: masses sum to {total}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_tokens(cls, doc_id, tokens: Sequence[str], vocabulary=None) -> "BowVector":
        """Normalized term frequencies over tokens present in ``vocabulary``."""
        counts = Counter(t for t in tokens if vocabulary is None or t in vocabulary)
        total = sum(counts.values())
        return cls(doc_id, {t: c / total for t, c in counts.items()} if total else {})

    def tokens(self) -> list[str]:
        return sorted(self.weights)

    def masses(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.weights[t] for t in tokens])


@dataclass
class CostOracle:
    """Euclidean distances between token vectors, cached per token pair."""

    space: EmbeddingSpace
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = self.space.index

    def matrix(self, a: Sequence[str], b: Sequence[str]) -> np.ndarray:
        try:
            va = self.space.vectors[[self._index[t] for t in a]]
            vb = self.space.vectors[[self._index[t] for t in b]]
        except KeyError as exc:
            raise DataError(f"token {exc.args[0]!r} is not in the embedding vocabulary") from None
        diff = va[:, None, :] - vb[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def __call__(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        if key not in self._cache:
            self._cache[key] = float(self.matrix([a], [b])[0, 0])
        return self._cache[key]


def _one_sided(a: BowVector, b: BowVector, costs: CostOracle) -> float:
    ta, tb = a.tokens(), b.tokens()
    c = costs.matrix(ta, tb)
    return float(np.dot(a.masses(ta), c.min(axis=1)))


def rwmd(a: BowVector, b: BowVector, costs: CostOracle, mode: str = "symmetric-max") -> float:
    """Relaxed WMD: every word of ``a`` ships all its mass to its nearest word in ``b``.

    ``one-sided`` keeps only the outgoing-mass constraint of ``a``;
    ``symmetric-max`` takes the larger of the two one-sided relaxations,
    which is still a lower bound on the exact distance.
    """
    if not a.weights or not b.weights:
        raise DataError(f"empty document in rwmd({a.doc_id}, {b.doc_id})")
    if mode == "one-sided":
        return _one_sided(a, b, costs)
    if mode == "symmetric-max":
        return max(_one_sided(a, b, costs), _one_sided(b, a, costs))
    raise ValueError(f"unknown rwmd mode {mode!r}")


def wmd_exact(a: BowVector, b: BowVector, costs: CostOracle) -> float:
    """Exact transport cost with both marginals enforced (small instances only)."""
    if not a.weights or not b.weights:
        raise DataError("empty document")
    ta, tb = a.tokens(), b.tokens()
    if len(set(ta) | set(tb)) > WMD_EXACT_MAX_VOCAB:
        raise ValueError(f"combined vocabulary exceeds {WMD_EXACT_MAX_VOCAB} tokens")
    c = costs.matrix(ta, tb)
    m, n = c.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([a.masses(ta), b.masses(tb)])
    res = linprog(c.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericalError(f"transport LP failed: {res.message}")
    return float(res.fun)


def distance_matrix(docs: Sequence[BowVector], costs: CostOracle, mode: str = "symmetric-max") -> np.ndarray:
    n = len(docs)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = rwmd(docs[i], docs[j], costs, mode)
    return d


def speech_similarity_matrix(
    docs: Sequence[BowVector], costs: CostOracle, mode: str = "symmetric-max"
) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise RWMD and its max-normalized similarity 1 - D/max(D) for one year."""
    if len(docs) < 2:
        raise DataError("need at least 2 documents")
    dist = distance_matrix(docs, costs, mode)
    if dist.max() <= 0:
        log.warning("all documents are identical; similarity is 1 everywhere off the diagonal")
    return dist, distance_to_similarity(dist)
