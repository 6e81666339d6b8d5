"""Rolling-window out-of-sample prediction scored by area under the precision-recall curve."""
from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from mlconflict import DataError, NumericalError
from mlconflict.tergm.mple import build_design, fit_design, year_design
from mlconflict.tergm.panel import ModelSpec, PanelSeries

log = logging.getLogger(__name__)


def aucpr(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Step-wise area under the precision-recall curve (average precision).

    Tied scores form a single threshold. Returns NaN without positives.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = y.sum()
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    k = np.arange(1, y.size + 1)
    # last index of each run of tied scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), y.size - 1]
    precision = tp[last] / k[last]
    recall = tp[last] / n_pos
    dr = np.diff(np.r_[0.0, recall])
    return float(np.sum(dr * precision))


def predict_aucpr(
    panel: PanelSeries, spec: ModelSpec, window: int = 5, years: Sequence[int] | None = None
) -> list[dict]:
    """Fit on each run of ``window`` consecutive years and score the following year.

    Test dyads are ranked by the linear predictor theta . delta evaluated on
    the observed test-year network (monotone in the pseudolikelihood tie
    probability). The random baseline AUC-PR is the test-year positive rate.
    """
    years = panel.years if years is None else [y for y in years if y in panel]
    if len(years) < window + 1:
        raise ValueError(f"need at least {window + 1} years, got {len(years)}")
    rows = []
    for k in range(window, len(years)):
        test = years[k]
        train = years[k - window : k]
        if spec.has_memory and test - 1 not in panel:
            continue
        test_design = year_design(panel, spec, test)
        if test_design.y.sum() == 0:
            log.info("test year %d has no positive dyads; skipped", test)
            continue
        try:
            designs = build_design(panel, spec, train)
            res = fit_design(designs, spec, on_separation="flag")
        except (NumericalError, DataError) as exc:
            log.warning("window ending %d could not be fitted: %s", train[-1], exc)
            continue
        scores = test_design.X @ res.coef
        rows.append(
            {
                "test_year": test,
                "aucpr": aucpr(scores, test_design.y),
                "baseline": float(test_design.y.mean()),
            }
        )
    return rows
