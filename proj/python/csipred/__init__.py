from ._csipred import (
    Config,
    ConfigError,
    ContractError,
    DataError,
    Dataset,
    DivergenceError,
    Predictor,
    compare,
    config,
    cosine_similarity,
    evaluate,
    forecast,
    generate_fading,
    make_windows,
    nmse,
    prepare,
    to_db,
    train,
)

__all__ = [
    "Config",
    "ConfigError",
    "ContractError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "Predictor",
    "compare",
    "config",
    "cosine_similarity",
    "evaluate",
    "forecast",
    "generate_fading",
    "make_windows",
    "nmse",
    "prepare",
    "to_db",
    "train",
]
