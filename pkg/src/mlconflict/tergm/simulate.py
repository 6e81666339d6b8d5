"""Gibbs sampling of networks from a fitted model."""
from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from mlconflict.tergm.panel import ModelSpec, YearData
from mlconflict.tergm.terms import dyad_values


def _static_logodds(coef, cov: YearData, prev, spec: ModelSpec) -> np.ndarray:
    n = cov.n
    eta = np.zeros((n, n))
    for c, t in zip(coef, spec.terms):
        if t.kind == "edges":
            eta += c
        elif not t.structural:
            v = np.nan_to_num(dyad_values(t, cov, prev), nan=0.0)
            eta += c * v
    return eta


def _gw(sp: int, decay: float) -> float:
    if decay == 0.0:
        return 1.0 if sp >= 1 else 0.0
    return math.exp(decay) * (1.0 - (1.0 - math.exp(-decay)) ** sp)


def _structural_delta(nbrs: list[set], i: int, j: int, terms, coefs) -> float:
    """Sum of coefficient-weighted structural change statistics for dyad (i, j)."""
    Ni, Nj = nbrs[i], nbrs[j]
    aij = 1 if j in Ni else 0
    di, dj = len(Ni) - aij, len(Nj) - aij
    total = 0.0
    for c, t in zip(coefs, terms):
        if t.kind == "altkstar":
            r = 1.0 - 1.0 / t.lam
            total += c * t.lam * (2.0 - r**di - r**dj)
        elif t.kind == "twostar":
            total += c * (di + dj)
        elif t.kind == "fourcycle":
            paths = 0
            for u in Ni:
                if u != j:
                    paths += len(nbrs[u] & Nj) - (1 if i in Nj else 0) * (1 if i in nbrs[u] else 0)
            total += c * paths
        elif t.kind == "gwesp":
            common = Ni & Nj
            delta = _gw(len(common), t.decay)
            for k in common:
                Nk = nbrs[k]
                for sp in (len(Ni & Nk) - aij, len(Nj & Nk) - aij):
                    delta += _gw(sp + 1, t.decay) - _gw(sp, t.decay)
            total += c * delta
    return total


def simulate(
    coef: Sequence[float],
    cov: YearData,
    prev: np.ndarray | None,
    spec: ModelSpec,
    n_sims: int = 50,
    burnin: int | None = None,
    interval: int | None = None,
    seed: int = 0,
    start: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Draw ``n_sims`` networks by single-dyad Gibbs updates.

    Each step picks a dyad uniformly at random and resamples it from its
    full conditional logistic(theta . delta). Defaults: burn-in of 10 sweeps
    and one sweep between retained draws, a sweep being one update per dyad.
    The chain starts at ``start`` (default: the empty graph).
    """
    coef = np.asarray(coef, dtype=float)
    if not np.all(np.isfinite(coef)):
        raise ValueError("coefficients must be finite")
    n = cov.n
    n_dyads = n * (n - 1) // 2
    burnin = 10 * n_dyads if burnin is None else burnin
    interval = max(1, n_dyads if interval is None else interval)
    static = _static_logodds(coef, cov, prev, spec)
    sterms = [(c, t) for c, t in zip(coef, spec.terms) if t.structural and c != 0.0]
    terms = [t for _, t in sterms]
    scoefs = [c for c, _ in sterms]
    A = np.zeros((n, n), dtype=np.int64) if start is None else np.array(start, dtype=np.int64)
    nbrs = [set(np.flatnonzero(A[v]).tolist()) for v in range(n)]
    iu = np.triu_indices(n, 1)
    rng = np.random.default_rng(seed)
    total_steps = burnin + interval * n_sims
    draws = []
    chunk = 65536
    step = 0
    while step < total_steps:
        m = min(chunk, total_steps - step)
        picks = rng.integers(0, n_dyads, size=m)
        rows = iu[0][picks].tolist()
        cols = iu[1][picks].tolist()
        logu = np.log(rng.random(m)).tolist()
        base = static[iu[0][picks], iu[1][picks]].tolist()
        for s in range(m):
            i, j = rows[s], cols[s]
            eta = base[s]
            if terms:
                eta += _structural_delta(nbrs, i, j, terms, scoefs)
            # log logistic(eta), overflow-safe
            log_p = -math.log1p(math.exp(-eta)) if eta >= 0 else eta - math.log1p(math.exp(eta))
            new = 1 if logu[s] < log_p else 0
            old = A[i, j]
            if new != old:
                A[i, j] = A[j, i] = new
                if new:
                    nbrs[i].add(j)
                    nbrs[j].add(i)
                else:
                    nbrs[i].discard(j)
                    nbrs[j].discard(i)
            step += 1
            if step > burnin and (step - burnin) % interval == 0:
                draws.append(A.astype(np.int8))
    return draws
