"""Python bindings for the TiFe attention autoencoder."""

from ._tife import (
    ContractError,
    DataError,
    Model,
    ModelDims,
    ShapeError,
    compute_threshold,
    detect,
    feature_attention,
    gen_data1,
    gen_data2,
    gradient_check,
    init_model,
    load_csv,
    min_max_scale,
    run_cli,
    time_attention,
    to_grayscale,
    train,
)

__all__ = [
    "ContractError",
    "DataError",
    "Model",
    "ModelDims",
    "ShapeError",
    "compute_threshold",
    "detect",
    "feature_attention",
    "gen_data1",
    "gen_data2",
    "gradient_check",
    "init_model",
    "load_csv",
    "min_max_scale",
    "run_cli",
    "time_attention",
    "to_grayscale",
    "train",
]
