from .base import ProbabilityModel, check_simplex, predict_proba
from .external import ExternalModel, ExternalModelSpec, open_external
from .forest import ForestModel, train_forest

__all__ = [
    "ProbabilityModel",
    "check_simplex",
    "predict_proba",
    "ExternalModel",
    "ExternalModelSpec",
    "open_external",
    "ForestModel",
    "train_forest",
]
