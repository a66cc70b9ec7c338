"""Non-normal mixtures of experts: fitting, prediction, clustering, selection.

Thin Python layer over the C++ core. The convenience helpers here accept
family names as strings ("normal", "skew-normal", "t", "skew-t") and numpy
arrays for data.
"""

from __future__ import annotations

import numpy as np

from ._nnmoe import (
    Dataset,
    DegenerateFitError,
    EStepCache,
    EvaluationError,
    ExpertParams,
    Family,
    FitOptions,
    FitResult,
    GatingParams,
    GeneratedData,
    IoError,
    ModelFile,
    MoEParams,
    MoESpec,
    ParseError,
    PredictionPoint,
    ScenarioConfig,
    SelectionRow,
    SelectionTable,
    XY,
    align_labels,
    benchmark_scenario,
    criteria,
    e_step,
    family_from_name,
    family_has_lambda,
    family_has_nu,
    family_name,
    free_params,
    generate,
    log_likelihood,
    map_cluster,
    mse_mean_function,
    mse_params,
    parse_model,
    predict,
    read_xy_csv,
    select_K,
    write_model,
)
from ._nnmoe import fit as _fit_raw

__all__ = [
    "Dataset",
    "DegenerateFitError",
    "EStepCache",
    "EvaluationError",
    "ExpertParams",
    "Family",
    "FitOptions",
    "FitResult",
    "GatingParams",
    "GeneratedData",
    "IoError",
    "ModelFile",
    "MoEParams",
    "MoESpec",
    "ParseError",
    "PredictionPoint",
    "ScenarioConfig",
    "SelectionRow",
    "SelectionTable",
    "XY",
    "align_labels",
    "benchmark_scenario",
    "cluster",
    "criteria",
    "e_step",
    "family_from_name",
    "family_has_lambda",
    "family_has_nu",
    "family_name",
    "fit",
    "free_params",
    "generate",
    "load_model",
    "log_likelihood",
    "map_cluster",
    "mse_mean_function",
    "mse_params",
    "parse_model",
    "predict",
    "predict_frame",
    "read_xy_csv",
    "save_model",
    "select",
    "select_K",
    "simulate",
    "write_model",
]


def _as_family(family):
    if isinstance(family, Family):
        return family
    return family_from_name(str(family))


def _options(**kwargs) -> FitOptions:
    opts = FitOptions()
    for key, value in kwargs.items():
        if not hasattr(opts, key):
            raise TypeError(f"unknown fit option {key!r}")
        setattr(opts, key, value)
    return opts


def fit(x, y, family="normal", K=2, p=1, q=1, **options) -> FitResult:
    """Fit a K-component mixture of experts to (x, y)."""
    spec = MoESpec(_as_family(family), K, p, q)
    data = Dataset.build(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                         p, q)
    return _fit_raw(spec, data, _options(**options))


def cluster(params: MoEParams, spec: MoESpec, x, y) -> np.ndarray:
    """MAP component labels (1..K) for the observations under the model."""
    data = Dataset.build(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                         spec.p, spec.q)
    cache = e_step(params, spec.family, data)
    return np.asarray(map_cluster(cache.tau), dtype=int)


def predict_frame(params: MoEParams, spec: MoESpec, x_new) -> dict:
    """Prediction summaries as arrays: mean, variance (NaN when undefined),
    gate probabilities, and per-component means."""
    points = predict(params, spec, np.asarray(x_new, dtype=float))
    return {
        "x": np.array([pt.x for pt in points]),
        "mean": np.array([pt.mean for pt in points]),
        "variance": np.array(
            [pt.variance if pt.variance is not None else np.nan for pt in points]
        ),
        "gate_probs": np.vstack([pt.gate_probs for pt in points]),
        "component_means": np.vstack([pt.per_component_means for pt in points]),
    }


def select(x, y, family="normal", K_range=(1, 2, 3, 4), p=1, q=1,
           **options) -> SelectionTable:
    """Fit each K in K_range and tabulate BIC/AIC/ICL."""
    data = Dataset.build(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                         p, q)
    return select_K(_as_family(family), data, [int(k) for k in K_range], p, q,
                    _options(**options))


def simulate(family="skew-t", n=500, seed=0, outlier_rate=0.0) -> GeneratedData:
    """Draw from the two-component benchmark scenario."""
    config = benchmark_scenario(_as_family(family), n, seed)
    config.outlier_rate = outlier_rate
    return generate(config)


def save_model(path, model: ModelFile) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_model(model))


def load_model(path) -> ModelFile:
    with open(path, "r", encoding="utf-8") as f:
        return parse_model(f.read())
