"""Year-block bootstrap of the pooled pseudolikelihood estimate."""
from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from mlconflict import NumericalError
from mlconflict.tergm.mple import build_design, fit_design
from mlconflict.tergm.panel import ModelSpec, PanelSeries

log = logging.getLogger(__name__)

DEFAULT_REPS = 2000
CI_LEVEL = 0.95


@dataclass
class TergmFit:
    terms: list[str]
    coefficients: np.ndarray
    replicates: np.ndarray  # (reps, terms); NaN rows for failed replicates
    ci: np.ndarray  # (terms, 2)
    meta: dict = field(default_factory=dict)

    def coef(self, term: str) -> float:
        return float(self.coefficients[self._k(term)])

    def _k(self, term: str) -> int:
        try:
            return self.terms.index(term)
        except ValueError:
            raise KeyError(f"unknown term {term!r}") from None

    @property
    def significant(self) -> np.ndarray:
        return (self.ci[:, 0] > 0) | (self.ci[:, 1] < 0)

    def table(self) -> list[dict]:
        return [
            {
                "term": t,
                "estimate": float(c),
                "ci_lo": float(lo),
                "ci_hi": float(hi),
                "significant": bool(s),
            }
            for t, c, (lo, hi), s in zip(self.terms, self.coefficients, self.ci, self.significant)
        ]

    def to_dict(self) -> dict:
        reps = self.replicates
        ok = reps[~np.isnan(reps).any(axis=1)] if reps.size else reps
        return {
            "terms": self.terms,
            "coefficients": dict(zip(self.terms, self.coefficients.tolist())),
            "ci": {t: [float(lo), float(hi)] for t, (lo, hi) in zip(self.terms, self.ci)},
            "replicate_summary": {
                t: {
                    "mean": float(np.mean(ok[:, k])) if len(ok) else None,
                    "sd": float(np.std(ok[:, k], ddof=1)) if len(ok) > 1 else None,
                }
                for k, t in enumerate(self.terms)
            },
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TergmFit":
        terms = list(d["terms"])
        return cls(
            terms,
            np.array([d["coefficients"][t] for t in terms], dtype=float),
            np.empty((0, len(terms))),
            np.array([d["ci"][t] for t in terms], dtype=float),
            dict(d.get("meta", {})),
        )


def percentile_ci(replicates: np.ndarray, level: float = CI_LEVEL) -> np.ndarray:
    ok = replicates[~np.isnan(replicates).any(axis=1)]
    if len(ok) == 0:
        return np.full((replicates.shape[1], 2), np.nan)
    a = (1.0 - level) / 2.0
    return np.percentile(ok, [100 * a, 100 * (1 - a)], axis=0).T


def bootstrap_ci(
    panel: PanelSeries,
    spec: ModelSpec,
    years: Sequence[int] | None = None,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    level: float = CI_LEVEL,
    on_separation: str = "raise",
    threads: int = 1,
) -> TergmFit:
    """Refit the MPLE on year blocks resampled with replacement; percentile intervals.

    Replicate r draws from its own RNG stream seeded by (seed, r), so results
    do not depend on ``threads``.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    designs = build_design(panel, spec, years)
    full = fit_design(designs, spec, on_separation=on_separation)
    T = len(designs)

    def replicate(r: int):
        rng = np.random.default_rng([seed, r])
        pick = rng.integers(0, T, size=T)
        try:
            res = fit_design([designs[i] for i in pick], spec, start=full.coef)
        except NumericalError as exc:
            log.debug("replicate %d failed: %s", r, exc)
            return None
        return res.coef if res.converged else None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(replicate, range(reps)))
    else:
        results = [replicate(r) for r in range(reps)]
    out = np.full((reps, len(spec)), np.nan)
    failures = 0
    for r, coef in enumerate(results):
        if coef is None:
            failures += 1
        else:
            out[r] = coef
    if failures:
        log.warning("%d of %d bootstrap replicates failed and were excluded", failures, reps)
    return TergmFit(
        terms=spec.labels,
        coefficients=full.coef,
        replicates=out,
        ci=percentile_ci(out, level),
        meta={
            "years": full.years,
            "reps": reps,
            "seed": seed,
            "failed_replicates": failures,
            "dropped_dyads": full.dropped_dyads,
            "n_obs": full.n_obs,
            "level": level,
            "spec": spec.to_strings(),
            "separated": list(full.separated),
            "converged": bool(full.converged),
        },
    )


def interpret(fit: TergmFit | Mapping[str, float], term: str, others_at_zero: bool = True) -> tuple[float, float]:
    """Tie probability and odds multiplier for a one-unit change in ``term``.

    The probability is for a dyad whose only nonzero change statistics are
    the edges term and, when ``others_at_zero`` is true and ``term`` is not
    edges, ``term`` itself; with ``others_at_zero=False`` it is the
    baseline (edges-only) probability.
    """
    coefs = dict(zip(fit.terms, fit.coefficients)) if isinstance(fit, TergmFit) else dict(fit)
    if term not in coefs:
        raise KeyError(f"unknown term {term!r}")
    eta = coefs.get("edges", 0.0)
    if others_at_zero and term != "edges":
        eta += coefs[term]
    return float(expit(eta)), float(np.exp(coefs[term]))
