"""Bicycle accident severity risk toolkit."""

from ._core import (
    DataError,
    Model,
    Region,
    UsageError,
    brier_score,
    brier_skill_score,
    build_graph,
    climatology_brier,
    compare_models,
    edge_betweenness,
    fit_logistic,
    format_percent,
    ingest_file,
    log_likelihood,
    log_likelihood_gradient,
    reliability_curve,
    version,
)

__version__ = version()

__all__ = [
    "DataError",
    "Model",
    "Region",
    "UsageError",
    "brier_score",
    "brier_skill_score",
    "build_graph",
    "climatology_brier",
    "compare_models",
    "edge_betweenness",
    "fit_logistic",
    "format_percent",
    "ingest_file",
    "log_likelihood",
    "log_likelihood_gradient",
    "reliability_curve",
    "version",
]
