"""Two-stage machine failure prediction: one-class SVM filter, random forest classifier."""

from ._core import (
    Error,
    ForestModel,
    ForestParams,
    Hyperparams,
    Model,
    OcsvmModel,
    OcsvmParams,
    binary_f3,
    f_beta,
    load_model,
    pacf,
    roc_auc,
    synth,
    train,
    train_forest,
    train_ocsvm,
)

__all__ = [
    "Error",
    "ForestModel",
    "ForestParams",
    "Hyperparams",
    "Model",
    "OcsvmModel",
    "OcsvmParams",
    "binary_f3",
    "f_beta",
    "load_model",
    "pacf",
    "roc_auc",
    "synth",
    "train",
    "train_forest",
    "train_ocsvm",
]
