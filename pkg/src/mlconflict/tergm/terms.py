"""Network statistics and their change statistics for pseudolikelihood and simulation.

Structural terms
    edges       number of ties
    altkstar    alternating k-stars sum_k (-1)^k S_k / lam^(k-2), k = 2..n-1,
                evaluated in closed form lam^2 sum_i [(1 - 1/lam)^d_i - 1 + d_i/lam]
    twostar     raw two-path count S_2
    fourcycle   number of 4-cycles
    gwesp       e^a sum_{ties} [1 - (1 - e^-a)^sp_ij]; with decay a = 0 this is
                the number of ties with at least one shared partner
Dyadic terms (statistic = sum over ties of a dyad value)
    memory      previous year's tie
    edgecov     dyadic covariate
    joint       both endpoints have nodal value >= threshold
    ratio       log10(stronger / weaker) nodal score
    bridge      number of endpoints flagged by a nodal indicator
"""
from __future__ import annotations

import numpy as np

from mlconflict import DataError
from mlconflict.tergm.panel import ModelSpec, Term, YearData


def gw_weight(sp, decay: float):
    """Geometric shared-partner weight e^a (1 - (1 - e^-a)^sp)."""
    sp = np.asarray(sp, dtype=float)
    return np.exp(decay) * (1.0 - (1.0 - np.exp(-decay)) ** sp)


def _altk(deg, lam):
    r = 1.0 - 1.0 / lam
    return lam * lam * (r ** np.asarray(deg, dtype=float) - 1.0 + np.asarray(deg, dtype=float) / lam)


def dyad_values(term: Term, cov: YearData, prev: np.ndarray | None) -> np.ndarray:
    """Per-dyad value of a dyadic term (its change statistic for every dyad)."""
    if term.kind == "memory":
        if prev is None:
            raise DataError("memory term needs the previous year's network")
        return np.asarray(prev, dtype=float)
    if term.kind == "edgecov":
        try:
            return cov.dyadic[term.name]
        except KeyError:
            raise DataError(f"missing dyadic covariate {term.name!r}") from None
    try:
        x = cov.nodal[term.name]
    except KeyError:
        raise DataError(f"missing nodal covariate {term.name!r}") from None
    if term.kind == "joint":
        hi = np.where(np.isnan(x), np.nan, (x >= term.threshold).astype(float))
        return np.outer(hi, hi)
    if term.kind == "ratio":
        hi = np.maximum.outer(x, x)
        lo = np.minimum.outer(x, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.log10(hi / lo)
        return np.where(lo > 0, r, np.nan)
    if term.kind == "bridge":
        return np.add.outer(x, x)
    raise ValueError(term.kind)


def compute_statistics(net, cov: YearData, prev, spec: ModelSpec) -> np.ndarray:
    """Full statistic vector of a network under ``spec``."""
    A = np.asarray(net, dtype=np.int64)
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    deg = A.sum(axis=1)
    out = np.zeros(len(spec))
    for k, t in enumerate(spec.terms):
        if t.kind == "edges":
            out[k] = A[iu].sum()
        elif t.kind == "altkstar":
            out[k] = _altk(deg, t.lam).sum()
        elif t.kind == "twostar":
            out[k] = (deg * (deg - 1) // 2).sum()
        elif t.kind == "fourcycle":
            cn = A @ A
            out[k] = (cn[iu] * (cn[iu] - 1) // 2).sum() / 2
        elif t.kind == "gwesp":
            cn = A @ A
            out[k] = (A[iu] * gw_weight(cn[iu], t.decay)).sum()
        else:
            vals = dyad_values(t, cov, prev)
            tied = A[iu] == 1
            out[k] = vals[iu][tied].sum()
    return out


def change_statistic(net, cov: YearData, prev, spec: ModelSpec, i: int, j: int) -> np.ndarray:
    """Statistics with tie (i, j) present minus with it absent, from local structure only."""
    if i == j:
        raise ValueError("dyad endpoints must differ")
    A = np.asarray(net, dtype=np.int64)
    aij = int(A[i, j])
    out = np.empty(len(spec))
    for k, t in enumerate(spec.terms):
        if t.kind == "edges":
            out[k] = 1.0
        elif t.kind == "altkstar":
            di = A[i].sum() - aij
            dj = A[j].sum() - aij
            r = 1.0 - 1.0 / t.lam
            out[k] = t.lam * (2.0 - r**di - r**dj)
        elif t.kind == "twostar":
            out[k] = A[i].sum() + A[j].sum() - 2 * aij
        elif t.kind == "fourcycle":
            walks = int((A[i] @ A) @ A[j])
            out[k] = walks - aij * (A[i].sum() + A[j].sum() - 1)
        elif t.kind == "gwesp":
            common = np.flatnonzero(A[i] & A[j])
            delta = float(gw_weight(common.size, t.decay))
            if common.size:
                sub = A[common]
                sp_i = sub @ A[i] - aij
                sp_j = sub @ A[j] - aij
                delta += float(
                    (gw_weight(sp_i + 1, t.decay) - gw_weight(sp_i, t.decay)).sum()
                    + (gw_weight(sp_j + 1, t.decay) - gw_weight(sp_j, t.decay)).sum()
                )
            out[k] = delta
        else:
            out[k] = dyad_values(t, cov, prev)[i, j]
    return out


def change_statistics_all(net, cov: YearData, prev, spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Change statistics for every dyad i < j.

    Returns ``(X, dyads)`` with ``X`` of shape (n_dyads, n_terms) and
    ``dyads`` the (n_dyads, 2) endpoint indices in upper-triangle order.
    """
    A = np.asarray(net, dtype=np.int64)
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    X = np.empty((iu[0].size, len(spec)))
    deg = A.sum(axis=1)
    cn = None
    for k, t in enumerate(spec.terms):
        if t.kind == "edges":
            X[:, k] = 1.0
        elif t.kind == "altkstar":
            dx = deg[:, None] - A  # degree of i without tie (i, j)
            r = 1.0 - 1.0 / t.lam
            X[:, k] = (t.lam * (2.0 - r ** dx - r ** dx.T))[iu]
        elif t.kind == "twostar":
            X[:, k] = (deg[:, None] + deg[None, :] - 2 * A)[iu]
        elif t.kind == "fourcycle":
            A3 = A @ A @ A
            X[:, k] = (A3 - A * (deg[:, None] + deg[None, :] - 1))[iu]
        elif t.kind == "gwesp":
            if cn is None:
                cn = A @ A
            w = gw_weight(cn, t.decay)
            d0 = gw_weight(cn + 1, t.decay) - w
            d1 = np.where(cn >= 1, w - gw_weight(np.maximum(cn - 1, 0), t.decay), 0.0)
            x0 = (A * d0) @ A
            x1 = (A * d1) @ A
            delta = w + np.where(A == 1, x1 + x1.T, x0 + x0.T)
            X[:, k] = delta[iu]
        else:
            X[:, k] = dyad_values(t, cov, prev)[iu]
    return X, np.column_stack(iu)
