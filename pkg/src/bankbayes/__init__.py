"""Bayesian GLM bankruptcy forecasting: ingest, fit, diagnose, evaluate."""

__version__ = "0.1.0"

from .diagnostics import ParameterSummary, RopeSpec, ess, split_rhat, summarize
from .evaluate import (
    ConfusionMatrix,
    ElpdResult,
    EvalReport,
    MetricSet,
    altman_zscore,
    classify,
    confusion,
    elpd_diff,
    irls_fit,
    kfold_elpd,
    metrics,
    posterior_predictive_prob,
)
from .glm_core import GlmModel, PriorSpec, sigmoid
from .ingest import ImputationStats, RawTable, impute_missing, parse_arff, parse_csv
from .nuts import PosteriorDraws, SamplerConfig, leapfrog, nuts_transition, run_chains
from .preprocess import (
    LabeledMatrix,
    ModelSpec,
    Scaler,
    apply_scaler,
    build_matrix,
    fit_scaler,
    load_catalog,
    model_preset,
    stratified_kfold,
)

__all__ = [
    "ConfusionMatrix", "ElpdResult", "EvalReport", "GlmModel", "ImputationStats",
    "LabeledMatrix", "MetricSet", "ModelSpec", "ParameterSummary", "PosteriorDraws",
    "PriorSpec", "RawTable", "RopeSpec", "SamplerConfig", "Scaler",
    "altman_zscore", "apply_scaler", "build_matrix", "classify", "confusion",
    "elpd_diff", "ess", "fit_scaler", "impute_missing", "irls_fit", "kfold_elpd",
    "leapfrog", "load_catalog", "metrics", "model_preset", "nuts_transition",
    "parse_arff", "parse_csv", "posterior_predictive_prob", "run_chains",
    "sigmoid", "split_rhat", "stratified_kfold", "summarize",
]
