"""Temporal ERGMs of conflict onset fitted by bootstrapped pseudolikelihood."""
from mlconflict.tergm.panel import ModelSpec, PanelSeries, Term, YearData
from mlconflict.tergm.terms import change_statistic, change_statistics_all, compute_statistics
from mlconflict.tergm.mple import MpleResult, SeparationError, fit_mple
from mlconflict.tergm.bootstrap import TergmFit, bootstrap_ci, interpret
from mlconflict.tergm.simulate import simulate
from mlconflict.tergm.gof import gof, modularity
from mlconflict.tergm.predict import aucpr, predict_aucpr
from mlconflict.tergm.covariates import derive_covariates

__all__ = [
    "ModelSpec", "PanelSeries", "Term", "YearData",
    "change_statistic", "change_statistics_all", "compute_statistics",
    "MpleResult", "SeparationError", "fit_mple",
    "TergmFit", "bootstrap_ci", "interpret", "simulate",
    "gof", "modularity", "aucpr", "predict_aucpr", "derive_covariates",
]
