"""Deep recurrent stochastic configuration networks (DeepRSCN) and reservoir baselines.

Typical use::

    from deeprscn import RscConfig, construct_deep_rscn, generate_mackey_glass, build_mg_task

    train, val, test = build_mg_task(generate_mackey_glass(), "MG")
    result = construct_deep_rscn(RscConfig(max_nodes=(25, 25, 8)), train, val)
    prediction = result.model.predict(test.inputs)
"""

from .construction import (
    ConfigurationError,
    ConstructionResult,
    DeepModel,
    RscConfig,
    construct_deep_rscn,
    early_stop_check,
    xi_scores,
)
from .datasets import (
    CsvFormatError,
    CsvSchema,
    MgConfig,
    SysIdConfig,
    TaskSplits,
    TimeSeriesDataset,
    add_gaussian_noise,
    build_mg_task,
    generate_mackey_glass,
    generate_sysid,
    load_csv,
)
from .esn import DeepEsnModel, EsnConfig, EsnModel, build_and_train_deep_esn, build_esn, predict_esn, train_esn
from .harness import ExperimentConfig, ReportRow, TrialResult, grid_search, nrmse, run_trials
from .readout import ProjectionConfig, ReadoutWeights, online_run, projection_update, solve_least_squares
from .reservoir import Activation, LayerParams, NilpotentMatrixError, ShapeError, rollout_layer

__version__ = "0.1.0"

__all__ = [
    "Activation", "ConfigurationError", "ConstructionResult", "CsvFormatError", "CsvSchema",
    "DeepEsnModel", "DeepModel", "EsnConfig", "EsnModel", "ExperimentConfig", "LayerParams",
    "MgConfig", "NilpotentMatrixError", "ProjectionConfig", "ReadoutWeights", "ReportRow",
    "RscConfig", "ShapeError", "SysIdConfig", "TaskSplits", "TimeSeriesDataset", "TrialResult",
    "add_gaussian_noise", "build_and_train_deep_esn", "build_esn", "build_mg_task",
    "construct_deep_rscn", "early_stop_check", "generate_mackey_glass", "generate_sysid",
    "grid_search", "load_csv", "nrmse", "online_run", "predict_esn", "projection_update",
    "rollout_layer", "run_trials", "solve_least_squares", "train_esn", "xi_scores",
]
