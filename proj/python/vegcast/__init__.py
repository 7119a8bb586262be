"""Vegetation condition forecasting: indices, AR/GP forecasts and skill metrics."""

from ._vegcast import (
    VegcastError,
    ar_forecast,
    categorize,
    compute_indices,
    fill_gaps,
    generate_synthetic,
    gp_forecast,
    r2_score,
    rmse,
    roc_auc,
    run_pipeline,
    s_metric,
    savitzky_golay,
)

__all__ = [
    "VegcastError",
    "ar_forecast",
    "categorize",
    "compute_indices",
    "fill_gaps",
    "generate_synthetic",
    "gp_forecast",
    "r2_score",
    "rmse",
    "roc_auc",
    "run_pipeline",
    "s_metric",
    "savitzky_golay",
]
