import numpy as np
import pytest

from conftest import random_graph
from mlconflict.tergm.panel import ModelSpec, PanelSeries, YearData
from mlconflict.tergm.predict import aucpr, predict_aucpr
from panels import edgecov_panel


def sweep_oracle(scores, labels):
    """Average precision from an explicit sweep over every distinct threshold."""
    P = sum(labels)
    total, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        sel = [l for s, l in zip(scores, labels) if s >= t]
        recall = sum(sel) / P
        total += (recall - prev_recall) * sum(sel) / len(sel)
        prev_recall = recall
    return total


def test_separable_panel_scores_one(rng):
    n = 20
    data = {}
    for year in range(2000, 2008):
        x = random_graph(rng, n, 0.2)
        data[year] = YearData(tuple(map(str, range(n))), x, dyadic={"x": x.astype(float)})
    rows = predict_aucpr(PanelSeries(data), ModelSpec.of("edges", "edgecov(x)"), window=5)
    assert [r["test_year"] for r in rows] == [2005, 2006, 2007]
    assert all(r["aucpr"] == pytest.approx(1.0) for r in rows)


def test_random_scores_near_positive_rate(rng):
    labels = (rng.random(20000) < 0.1).astype(int)
    assert aucpr(rng.random(20000), labels) == pytest.approx(labels.mean(), abs=0.01)


def test_matches_threshold_sweep(rng):
    for _ in range(50):
        m = int(rng.integers(5, 40))
        labels = rng.integers(0, 2, m)
        labels[0] = 1
        scores = rng.integers(0, 6, m).astype(float)  # plenty of ties
        assert aucpr(scores, labels) == pytest.approx(sweep_oracle(scores.tolist(), labels.tolist()))


def test_examples():
    assert aucpr([0.9, 0.1], [1, 0]) == 1.0
    assert aucpr([0.9, 0.1], [0, 1]) == 0.5
    assert aucpr([0.5, 0.5, 0.5, 0.5], [1, 0, 0, 0]) == 0.25
    assert np.isnan(aucpr([0.3, 0.2], [0, 0]))


def test_zero_positive_year_skipped(rng, caplog):
    panel = edgecov_panel(rng, n=20, years=range(2000, 2007))
    yd = panel[2006]
    panel = panel.replace({2006: YearData(yd.vertices, np.zeros_like(yd.outcome), yd.dyadic)})
    with caplog.at_level("INFO"):
        rows = predict_aucpr(panel, ModelSpec.of("edges", "edgecov(x)"))
    assert [r["test_year"] for r in rows] == [2005]
    assert "no positive dyads" in caplog.text


def test_informative_model_beats_baseline(rng):
    panel = edgecov_panel(rng, n=30, years=range(2000, 2009), beta=2.5)
    rows = predict_aucpr(panel, ModelSpec.of("edges", "edgecov(x)"))
    assert all(r["aucpr"] > r["baseline"] for r in rows)


def test_needs_enough_years(rng):
    with pytest.raises(ValueError):
        predict_aucpr(edgecov_panel(rng, years=range(2000, 2005)), ModelSpec.of("edges"))
