"""Vertex-layer community extraction against a fixed-degree null, and polarity metrics.

For a vertex set B and layer l, the within-set edge count is compared with
its Chung-Lu expectation sum_{i<j in B} d_i d_j / 2m and standardized by the
null standard deviation of C(|B|, 2) dyads at the layer's mean dyad variance:

    z_l(B) = (obs_l(B) - exp_l(B)) / sqrt(C(|B|, 2) * vbar_l)

clipped at zero. A vertex-layer set is scored as

    H(B, L) = SCORE_SCALE * (sum_{l in L} z_l(B)) ** 2 / |L|

so a layer is only worth adding when its surplus is comparable to the layers
already in L. Using a layer-wide dyad variance (rather than the variance of
the dyads inside B) keeps tiny sets in sparse layers from dominating.
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from mlconflict import DataError
from mlconflict.graphs import Community, CommunitySet, MultilayerGraph

SCORE_SCALE = 1.0
_EPS = 1e-10


@dataclass(frozen=True)
class ExtractionConfig:
    init_proportions: tuple[float, ...] = (0.20, 0.25, 0.30)
    seeds: int = 10
    max_iterations: int = 500
    overlap_threshold: float = 0.75
    min_size: int = 2

    def __post_init__(self):
        object.__setattr__(self, "init_proportions", tuple(float(p) for p in self.init_proportions))
        if not self.init_proportions or any(not 0 < p <= 1 for p in self.init_proportions):
            raise ValueError("init proportions must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.overlap_threshold <= 1:
            raise ValueError("overlap_threshold must lie in [0, 1]")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.min_size < 2:
            raise ValueError("min_size must be >= 2")


class _NullModel:
    """Per-layer adjacency, Chung-Lu edge probabilities and their variances."""

    def __init__(self, g: MultilayerGraph):
        self.A = g.stack()
        k, n, _ = self.A.shape
        self.P = np.zeros_like(self.A)
        for l in range(k):
            deg = self.A[l].sum(axis=1)
            two_m = deg.sum()
            if two_m > 0:
                p = np.minimum(np.outer(deg, deg) / two_m, 1.0)
                np.fill_diagonal(p, 0.0)
                self.P[l] = p
        self.V = self.P * (1.0 - self.P)
        iu = np.triu_indices(n, 1)
        # layer-wide null variance per dyad
        self.vbar = np.array([self.V[l][iu].mean() if n > 1 else 0.0 for l in range(k)])

    def totals(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Within-set (obs, expected, variance) per layer; each pair counted once."""
        sub = np.ix_(np.arange(self.A.shape[0]), mask, mask)
        return (
            self.A[sub].sum(axis=(1, 2)) / 2.0,
            self.P[sub].sum(axis=(1, 2)) / 2.0,
            self.vbar * mask.sum() * (mask.sum() - 1) / 2.0,
        )


def _z(obs, exp, var):
    obs, exp, var = np.broadcast_arrays(obs, exp, var)
    out = np.zeros(obs.shape)
    ok = var > _EPS
    out[ok] = (obs[ok] - exp[ok]) / np.sqrt(var[ok])
    return np.maximum(out, 0.0)


def _aggregate(z: np.ndarray, layer_mask: np.ndarray) -> np.ndarray:
    """Score from per-layer clipped z (layers on axis 0)."""
    n_layers = layer_mask.sum()
    if n_layers == 0:
        return np.zeros(z.shape[1:])
    s = np.tensordot(layer_mask.astype(float), z, axes=(0, 0))
    return SCORE_SCALE * s**2 / n_layers


def layer_z_scores(vertices: Iterable[str], g: MultilayerGraph, null: _NullModel | None = None) -> dict[str, float]:
    null = null or _NullModel(g)
    mask = _vertex_mask(vertices, g)
    z = _z(*null.totals(mask))
    return dict(zip(g.layer_names, z.tolist()))


def _vertex_mask(vertices: Iterable[str], g: MultilayerGraph) -> np.ndarray:
    idx = g.index()
    mask = np.zeros(len(g.vertices), dtype=bool)
    for v in vertices:
        if v not in idx:
            raise DataError(f"vertex {v!r} is not in the graph")
        mask[idx[v]] = True
    return mask


def _layer_mask(layers: Iterable[str], g: MultilayerGraph) -> np.ndarray:
    names = g.layer_names
    mask = np.zeros(len(names), dtype=bool)
    for l in layers:
        if l not in names:
            raise DataError(f"layer {l!r} is not in the graph")
        mask[names.index(l)] = True
    return mask


def vertex_layer_score(B: Iterable[str], L: Iterable[str], g: MultilayerGraph, null: _NullModel | None = None) -> float:
    """Significance score of vertex set B on layer set L; 0 when there is no surplus."""
    vmask = _vertex_mask(B, g)
    lmask = _layer_mask(L, g)
    if vmask.sum() < 2:
        raise DataError("vertex set needs at least 2 members")
    if not lmask.any():
        raise DataError("layer set must be nonempty")
    null = null or _NullModel(g)
    z = _z(*null.totals(vmask))
    return float(_aggregate(z, lmask))


def _greedy(null: _NullModel, vmask: np.ndarray, lmask: np.ndarray, cfg: ExtractionConfig):
    """Alternate single-vertex toggles and single-layer toggles while the score strictly rises."""
    A, P = null.A, null.P
    vmask = vmask.copy()
    lmask = lmask.copy()
    obs, exp, var = null.totals(vmask)
    fv = vmask.astype(float)
    rA = A @ fv  # (k, n): edges from each vertex into B
    rP = P @ fv
    current = float(_aggregate(_z(obs, exp, var), lmask))
    moves = 0
    while moves < cfg.max_iterations:
        improved = False
        # vertex phase
        while moves < cfg.max_iterations:
            sign = np.where(vmask, -1.0, 1.0)
            size = vmask.sum() + sign
            cvar = null.vbar[:, None] * (size * (size - 1) / 2.0)
            z = _z(obs[:, None] + sign * rA, exp[:, None] + sign * rP, cvar)
            cand = _aggregate(z, lmask)
            if vmask.sum() <= cfg.min_size:
                cand[vmask] = -np.inf
            v = int(np.argmax(cand))
            if cand[v] <= current + _EPS * max(1.0, abs(current)):
                break
            s = sign[v]
            obs += s * rA[:, v]
            exp += s * rP[:, v]
            var = cvar[:, v].copy()
            rA += s * A[:, :, v]
            rP += s * P[:, :, v]
            vmask[v] = not vmask[v]
            current = float(cand[v])
            moves += 1
            improved = True
        # layer phase
        z = _z(obs, exp, var)
        while moves < cfg.max_iterations:
            best, best_l = current, -1
            for l in range(lmask.size):
                trial = lmask.copy()
                trial[l] = not trial[l]
                if not trial.any():
                    continue
                s = float(_aggregate(z, trial))
                if s > best + _EPS * max(1.0, abs(best)):
                    best, best_l = s, l
            if best_l < 0:
                break
            lmask[best_l] = not lmask[best_l]
            current = best
            moves += 1
            improved = True
        if not improved:
            break
    return vmask, lmask, current


def _jaccard(a: frozenset, b: frozenset) -> float:
    return len(a & b) / len(a | b)


def initial_sets(n: int, cfg: ExtractionConfig, seed: int) -> list[tuple[float, np.ndarray]]:
    """Random starting vertex index sets, one RNG stream per (seed, proportion, start)."""
    out = []
    for pi, p in enumerate(cfg.init_proportions):
        size = min(n, max(cfg.min_size, int(round(p * n))))
        for s in range(cfg.seeds):
            rng = np.random.default_rng([seed, pi, s])
            out.append((p, np.sort(rng.choice(n, size=size, replace=False))))
    return out


def extract(
    g: MultilayerGraph,
    cfg: ExtractionConfig = ExtractionConfig(),
    seed: int = 0,
    starts: Sequence[Sequence[str]] | None = None,
) -> CommunitySet:
    """Locally optimal vertex-layer communities from random starts, near-duplicates merged.

    ``starts`` overrides the random initial vertex sets.
    """
    n = len(g.vertices)
    if n < cfg.min_size or g.n_layers == 0:
        return CommunitySet(g.year, ())
    null = _NullModel(g)
    if starts is None:
        inits = [idx for _, idx in initial_sets(n, cfg, seed)]
    else:
        index = g.index()
        inits = [np.array([index[v] for v in s], dtype=int) for s in starts]
    found: list[Community] = []
    for idx in inits:
        vmask = np.zeros(n, dtype=bool)
        vmask[idx] = True
        if vmask.sum() < cfg.min_size:
            continue
        vmask, lmask, score = _greedy(null, vmask, np.ones(g.n_layers, dtype=bool), cfg)
        if score <= 0 or vmask.sum() < cfg.min_size:
            continue
        found.append(
            Community(
                frozenset(g.vertices[i] for i in np.flatnonzero(vmask)),
                frozenset(g.layer_names[l] for l in np.flatnonzero(lmask)),
                score,
            )
        )
    return CommunitySet(g.year, tuple(deduplicate(found, cfg.overlap_threshold)))


def deduplicate(found: Sequence[Community], threshold: float) -> list[Community]:
    """Drop communities overlapping a higher-scoring one by vertex Jaccard > threshold."""
    kept: list[Community] = []
    ordered = sorted(found, key=lambda c: (-c.score, sorted(c.vertices), sorted(c.layers)))
    for c in ordered:
        if all(_jaccard(c.vertices, k.vertices) <= threshold for k in kept):
            kept.append(c)
    return kept


@dataclass(frozen=True)
class PolarityReport:
    year: int
    n_communities: int
    pct_assigned: float
    pct_bridges: float


def membership_counts(cs: CommunitySet) -> dict[str, int]:
    counts: dict[str, int] = {}
    for c in cs.communities:
        for v in c.vertices:
            counts[v] = counts.get(v, 0) + 1
    return counts


def polarity_metrics(cs: CommunitySet, system_vertices: Sequence[str]) -> PolarityReport:
    system = set(system_vertices)
    counts = membership_counts(cs)
    missing = set(counts) - system
    if missing:
        raise DataError(f"community members outside the system: {sorted(missing)[:5]}")
    n = len(system)
    if n == 0:
        return PolarityReport(cs.year, len(cs), 0.0, 0.0)
    return PolarityReport(
        cs.year,
        len(cs),
        len(counts) / n,
        sum(1 for c in counts.values() if c >= 2) / n,
    )


@dataclass(frozen=True)
class NodeRole:
    is_bridge: bool
    partners: frozenset[str] | None = field(default=None)  # None unless in exactly one community


def node_roles(cs: CommunitySet) -> dict[str, NodeRole]:
    """Bridge flag and joint-member partners for every community member."""
    counts = membership_counts(cs)
    sole: dict[str, Community] = {}
    for c in cs.communities:
        for v in c.vertices:
            if counts[v] == 1:
                sole[v] = c
    roles = {}
    for v, cnt in counts.items():
        if cnt >= 2:
            roles[v] = NodeRole(True, None)
        else:
            c = sole[v]
            partners = frozenset(u for u in c.vertices if u != v and counts[u] == 1)
            roles[v] = NodeRole(False, partners)
    return roles
