"""Simulation-based goodness of fit: degree, edgewise shared partners, modularity."""
from __future__ import annotations

import logging
from collections.abc import Sequence

import networkx as nx
import numpy as np

from mlconflict.tergm.panel import ModelSpec, PanelSeries, usable_years
from mlconflict.tergm.simulate import simulate

log = logging.getLogger(__name__)

QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)
QUANTILE_NAMES = ("min", "q25", "median", "q75", "max")


def degree_counts(A: np.ndarray, nbins: int) -> np.ndarray:
    deg = np.asarray(A).sum(axis=1).astype(int)
    return np.bincount(np.minimum(deg, nbins - 1), minlength=nbins)[:nbins]


def esp_counts(A: np.ndarray, nbins: int) -> np.ndarray:
    """Number of ties with exactly k shared partners, k = 0..nbins-1 (last bin open)."""
    A = np.asarray(A, dtype=np.int64)
    iu = np.triu_indices(A.shape[0], 1)
    tied = A[iu] == 1
    sp = (A @ A)[iu][tied]
    return np.bincount(np.minimum(sp, nbins - 1), minlength=nbins)[:nbins]


def modularity(A: np.ndarray, partition: Sequence[Sequence[int]] | None = None) -> float:
    """Newman modularity; the partition defaults to greedy (CNM) modularity maximization."""
    A = np.asarray(A, dtype=float)
    two_m = A.sum()
    if two_m == 0:
        return 0.0
    if partition is None:
        g = nx.from_numpy_array(A)
        partition = [sorted(c) for c in nx.community.greedy_modularity_communities(g)]
    deg = A.sum(axis=1)
    q = 0.0
    for c in partition:
        c = list(c)
        q += A[np.ix_(c, c)].sum() / two_m - (deg[c].sum() / two_m) ** 2
    return float(q)


def _offset_log(x):
    return np.log(np.asarray(x, dtype=float) + 1.0)


def gof(
    coef: Sequence[float],
    panel: PanelSeries,
    spec: ModelSpec,
    years: Sequence[int] | None = None,
    n_sims: int = 50,
    seed: int = 0,
    burnin: int | None = None,
    interval: int | None = None,
) -> dict[str, list[dict]]:
    """Per-year envelopes of simulated statistics next to the observed values.

    Degree and ESP counts are reported as log(count + 1). Returns one list of
    rows per statistic, each row keyed by year, bin, observed and the
    five-number summary of the simulations.
    """
    report: dict[str, list[dict]] = {"degree": [], "esp": [], "modularity": []}
    for y_i, year in enumerate(usable_years(panel, spec, years)):
        yd = panel[year]
        prev = panel.prev(year) if spec.has_memory else None
        sims = simulate(
            coef, yd, prev, spec, n_sims=n_sims, burnin=burnin, interval=interval,
            seed=seed * 100003 + y_i, start=yd.outcome,
        )
        obs = yd.outcome
        nb_deg = int(max(obs.sum(axis=1).max(), max(s.sum(axis=1).max() for s in sims))) + 1
        nb_esp = int(max(esp_counts_max(obs), max(esp_counts_max(s) for s in sims))) + 1
        for name, fn, nb in (("degree", degree_counts, nb_deg), ("esp", esp_counts, nb_esp)):
            o = _offset_log(fn(obs, nb))
            sim = _offset_log(np.array([fn(s, nb) for s in sims]))
            qs = np.quantile(sim, QUANTILES, axis=0)
            for b in range(nb):
                row = {"year": year, "bin": b, "observed": float(o[b])}
                row.update({qn: float(qs[k, b]) for k, qn in enumerate(QUANTILE_NAMES)})
                report[name].append(row)
        mod_sim = np.array([modularity(s) for s in sims])
        qs = np.quantile(mod_sim, QUANTILES)
        row = {"year": year, "bin": 0, "observed": modularity(obs)}
        row.update({qn: float(q) for qn, q in zip(QUANTILE_NAMES, qs)})
        report["modularity"].append(row)
    return report


def esp_counts_max(A: np.ndarray) -> int:
    A = np.asarray(A, dtype=np.int64)
    if A.sum() == 0:
        return 0
    sp = (A @ A)[A == 1]
    return int(sp.max())
