"""Gyroscope bias calibration: simulation, zero-order baselines, CNN regression and evaluation."""

from ._core import (
    CnnModel,
    ConfigError,
    LoadError,
    bayes_posterior_mean_uniform,
    crossing_time,
    evaluate,
    improvement_report,
    ingest,
    model_based_rmse_curve,
    rmse,
    running_average,
    simulate,
    simulate_recording,
    train,
    write_virtual_dataset,
    zero_order_bias,
)

__all__ = [
    "CnnModel",
    "ConfigError",
    "LoadError",
    "bayes_posterior_mean_uniform",
    "crossing_time",
    "evaluate",
    "improvement_report",
    "ingest",
    "model_based_rmse_curve",
    "rmse",
    "running_average",
    "simulate",
    "simulate_recording",
    "train",
    "write_virtual_dataset",
    "zero_order_bias",
]
