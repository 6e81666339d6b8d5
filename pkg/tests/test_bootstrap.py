import numpy as np
import pytest

from mlconflict.tergm.bootstrap import TergmFit, bootstrap_ci, interpret
from mlconflict.tergm.panel import ModelSpec, PanelSeries
from panels import edgecov_panel

SPEC = ModelSpec.of("edges", "edgecov(x)")


def test_replicate_matrix_shape(rng):
    fit = bootstrap_ci(edgecov_panel(rng), SPEC, reps=2)
    assert fit.replicates.shape == (2, 2)
    with pytest.raises(ValueError):
        bootstrap_ci(edgecov_panel(rng), SPEC, reps=1)


def test_identical_years_give_zero_width(rng):
    one = edgecov_panel(rng, years=[2000])[2000]
    panel = PanelSeries({y: one for y in range(2000, 2006)})
    fit = bootstrap_ci(panel, SPEC, reps=50)
    np.testing.assert_allclose(fit.ci[:, 1] - fit.ci[:, 0], 0.0, atol=1e-8)


def test_ci_ordered_and_deterministic(rng):
    panel = edgecov_panel(rng)
    a = bootstrap_ci(panel, SPEC, reps=60, seed=4)
    b = bootstrap_ci(panel, SPEC, reps=60, seed=4, threads=4)
    assert np.all(a.ci[:, 0] <= a.ci[:, 1])
    np.testing.assert_array_equal(a.replicates, b.replicates)
    c = bootstrap_ci(panel, SPEC, reps=60, seed=5)
    assert not np.array_equal(a.replicates, c.replicates)
    for k in range(2):
        ok = a.replicates[:, k]
        assert a.ci[k, 0] >= ok.min() and a.ci[k, 1] <= ok.max()


def test_serialization_round_trip(rng):
    fit = bootstrap_ci(edgecov_panel(rng), SPEC, reps=20)
    back = TergmFit.from_dict(fit.to_dict())
    assert back.terms == fit.terms
    np.testing.assert_array_equal(back.ci, fit.ci)
    assert back.meta["reps"] == 20 and back.meta["failed_replicates"] == 0


def test_interpret_examples():
    p, _ = interpret({"edges": -7.76}, "edges")
    assert p == pytest.approx(0.000426, abs=5e-6)
    _, odds = interpret({"edges": -7.76, "edgecov(contiguity)": 3.78}, "edgecov(contiguity)")
    assert odds == pytest.approx(43.82, abs=0.01)
    assert interpret({"edges": -1.0, "memory": 0.0}, "memory")[1] == 1.0
    p, _ = interpret({"edges": 0.0, "memory": 1.0}, "memory", others_at_zero=False)
    assert p == 0.5
    with pytest.raises(KeyError):
        interpret({"edges": 0.0}, "memory")


@pytest.mark.slow
def test_percentile_interval_coverage():
    truth = np.array([-2.0, 1.5])
    covered = np.zeros(2, dtype=int)
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        panel = edgecov_panel(rng, n=25, years=range(2000, 2010))
        fit = bootstrap_ci(panel, SPEC, reps=500, seed=trial)
        covered += (fit.ci[:, 0] <= truth) & (truth <= fit.ci[:, 1])
    assert np.all(covered >= 90), covered
