"""Mixture-of-linear-regressions laboratory: Python surface over the C++ core."""

from ._core import (
    EMResult,
    MetricCurve,
    MixtureSpec,
    ModelConfig,
    ModelParams,
    PosteriorSummary,
    Prompt,
    TraceRow,
    TrainConfig,
    TrainResult,
    argmin_predict,
    batch_loss,
    em_fit,
    eval_mse_curve,
    eval_sq_distance,
    gelu,
    layernorm,
    load_model,
    model_query_prediction,
    ols_predict,
    ols_weights,
    oracle_pred_error,
    posterior_mean_predict,
    predictor_names,
    residual_matrix,
    run_circuit,
    run_circuit_stages,
    sample_prompt,
    sample_spec,
    save_model,
    softmax,
    train,
)

__all__ = [
    "EMResult",
    "MetricCurve",
    "MixtureSpec",
    "ModelConfig",
    "ModelParams",
    "PosteriorSummary",
    "Prompt",
    "TraceRow",
    "TrainConfig",
    "TrainResult",
    "argmin_predict",
    "batch_loss",
    "em_fit",
    "eval_mse_curve",
    "eval_sq_distance",
    "gelu",
    "layernorm",
    "load_model",
    "model_query_prediction",
    "ols_predict",
    "ols_weights",
    "oracle_pred_error",
    "posterior_mean_predict",
    "predictor_names",
    "residual_matrix",
    "run_circuit",
    "run_circuit_stages",
    "sample_prompt",
    "sample_spec",
    "save_model",
    "softmax",
    "train",
]
