"""Maximum pseudolikelihood: logistic regression of ties on change statistics."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from mlconflict import DataError, NumericalError
from mlconflict.tergm.panel import ModelSpec, PanelSeries, usable_years
from mlconflict.tergm.terms import change_statistics_all

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_ITER = 100
# Coefficients this large only arise when a tie indicator is perfectly predicted.
SEPARATION_BOUND = 20.0


class SeparationError(NumericalError):
    """The pseudolikelihood has no finite maximizer."""

    def __init__(self, message: str, terms: Sequence[str] = (), coef=None):
        super().__init__(message)
        self.terms = list(terms)
        self.coef = coef


@dataclass
class YearDesign:
    year: int
    X: np.ndarray
    y: np.ndarray
    dyads: np.ndarray
    dropped: int = 0


@dataclass
class MpleResult:
    terms: list[str]
    coef: np.ndarray
    converged: bool
    iterations: int
    loglik_trace: list[float] = field(default_factory=list)
    separated: list[str] = field(default_factory=list)
    years: list[int] = field(default_factory=list)
    dropped_dyads: int = 0
    n_obs: int = 0

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else float("nan")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.terms, self.coef.tolist()))


def year_design(panel: PanelSeries, spec: ModelSpec, year: int) -> YearDesign:
    """Change-statistic rows and observed tie indicators for one year; rows with missing values dropped."""
    yd = panel[year]
    spec.check(yd)
    prev = panel.prev(year) if spec.has_memory else None
    X, dyads = change_statistics_all(yd.outcome, yd, prev, spec)
    y = yd.outcome[dyads[:, 0], dyads[:, 1]].astype(float)
    ok = np.all(np.isfinite(X), axis=1)
    return YearDesign(year, X[ok], y[ok], dyads[ok], int((~ok).sum()))


def build_design(panel: PanelSeries, spec: ModelSpec, years: Sequence[int] | None = None) -> list[YearDesign]:
    yrs = usable_years(panel, spec, years)
    if not yrs:
        raise DataError("no usable years for this model (memory terms need a preceding year)")
    return [year_design(panel, spec, y) for y in yrs]


def loglik(X: np.ndarray, y: np.ndarray, coef: np.ndarray) -> float:
    eta = X @ coef
    # log sigma(eta) = -log(1 + e^-eta), computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_irls(
    X: np.ndarray,
    y: np.ndarray,
    start: np.ndarray | None = None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, bool, int, list[float]]:
    """Newton-Raphson / IRLS with step halving so the log-likelihood never decreases.

    Converged when the gradient norm per observation drops below ``tol`` or
    the Newton step becomes negligible (floating-point noise in a gradient
    summed over many dyads can exceed any absolute tolerance).
    """
    p = X.shape[1]
    coef = np.zeros(p) if start is None else np.array(start, dtype=float)
    ll = loglik(X, y, coef)
    trace = [ll]
    for it in range(1, max_iter + 1):
        mu = expit(X @ coef)
        grad = X.T @ (y - mu)
        if np.linalg.norm(grad) < tol * len(y):
            return coef, True, it - 1, trace
        w = mu * (1.0 - mu)
        H = (X * w[:, None]).T @ X
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise NumericalError("non-finite Newton step (collinear or constant change statistics?)")
        if np.linalg.norm(step) < 1e-12 * (1.0 + np.linalg.norm(coef)):
            return coef, True, it - 1, trace
        t = 1.0
        while True:
            cand = coef + t * step
            cll = loglik(X, y, cand)
            if cll >= ll or t < 1e-10:
                break
            t /= 2.0
        if cll < ll:
            # no ascent possible along the Newton direction: at numerical optimum
            return coef, True, it, trace
        coef, ll = cand, cll
        trace.append(ll)
    mu = expit(X @ coef)
    return coef, bool(np.linalg.norm(X.T @ (y - mu)) < tol * len(y)), max_iter, trace


def fit_design(
    designs: Sequence[YearDesign],
    spec: ModelSpec,
    start: np.ndarray | None = None,
    on_separation: str = "raise",
) -> MpleResult:
    X = np.concatenate([d.X for d in designs])
    y = np.concatenate([d.y for d in designs])
    labels = spec.labels
    if y.size == 0:
        raise DataError("no dyads to fit")
    if y.min() == y.max():
        msg = f"all {y.size} tie indicators equal {int(y[0])}; the edges coefficient diverges"
        if on_separation == "raise":
            raise SeparationError(msg, ["edges"])
        log.warning(msg)
    const = np.ptp(X, axis=0) == 0
    const[0] = False
    if const.any():
        bad = [labels[k] for k in np.flatnonzero(const)]
        raise NumericalError(f"constant change statistics for {bad}; coefficients not identified")
    coef, converged, iters, trace = logistic_irls(X, y, start)
    flagged = [labels[k] for k in np.flatnonzero(np.abs(coef) > SEPARATION_BOUND)]
    if flagged and on_separation == "raise":
        raise SeparationError(f"separation detected; diverging coefficients for {flagged}", flagged, coef)
    return MpleResult(
        terms=labels,
        coef=coef,
        converged=converged,
        iterations=iters,
        loglik_trace=trace,
        separated=flagged,
        years=[d.year for d in designs],
        dropped_dyads=sum(d.dropped for d in designs),
        n_obs=int(y.size),
    )


def fit_mple(
    panel: PanelSeries,
    spec: ModelSpec,
    years: Sequence[int] | None = None,
    on_separation: str = "raise",
) -> MpleResult:
    """Pooled pseudolikelihood fit over the usable years.

    ``on_separation="flag"`` returns diverging coefficients listed in
    ``separated`` instead of raising :class:`SeparationError`.
    """
    designs = build_design(panel, spec, years)
    res = fit_design(designs, spec, on_separation=on_separation)
    if not res.converged:
        log.warning("MPLE did not converge in %d iterations", res.iterations)
    return res
