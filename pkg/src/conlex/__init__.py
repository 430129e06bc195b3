"""Contrastive, label-aware local explanations for black-box classifiers."""

__version__ = "0.1.0"

from .blackbox import (
    ExternalModel,
    ExternalModelSpec,
    ForestModel,
    ProbabilityModel,
    open_external,
    predict_proba,
    train_forest,
)
from .data import TabularDataset, ingest_csv
from .errors import (
    ConfigError,
    ConlexError,
    DegenerateComponent,
    DimensionError,
    IllConditioned,
    InsufficientData,
    InvalidTrainingData,
    ModelUnavailable,
    SchemaError,
    SingleClassNeighborhood,
    SingularSystem,
)
from .evaluation import (
    FidelityReport,
    StabilityReport,
    fidelity_report,
    jaccard,
    stability_experiment,
)
from .explainers import (
    Budget,
    ExplainConfig,
    Explanation,
    config_token,
    explain,
    explain_detailed,
    fit_ce_climax,
    fit_l_climax,
    fit_lime,
    forward_select,
    logit_transform,
    parse_token,
)
from .gmm import GmmModel, balance_gmm, fit_gmm
from .influence import (
    InfluenceResult,
    LocalFitState,
    fit_full,
    influence_scores,
    sampling_probabilities,
    subsample_and_refit,
)
from .surrogate import (
    FeatureStats,
    KernelConfig,
    SurrogateSet,
    balance_ros,
    default_kernel_width,
    label_with_blackbox,
    perturb,
    proximity_weights,
)

__all__ = [
    "__version__",
    "ProbabilityModel",
    "ForestModel",
    "train_forest",
    "ExternalModel",
    "ExternalModelSpec",
    "open_external",
    "predict_proba",
    "TabularDataset",
    "ingest_csv",
    "FeatureStats",
    "KernelConfig",
    "SurrogateSet",
    "perturb",
    "proximity_weights",
    "label_with_blackbox",
    "balance_ros",
    "default_kernel_width",
    "GmmModel",
    "fit_gmm",
    "balance_gmm",
    "Budget",
    "ExplainConfig",
    "Explanation",
    "logit_transform",
    "fit_lime",
    "fit_l_climax",
    "fit_ce_climax",
    "forward_select",
    "explain",
    "explain_detailed",
    "config_token",
    "parse_token",
    "LocalFitState",
    "InfluenceResult",
    "fit_full",
    "influence_scores",
    "sampling_probabilities",
    "subsample_and_refit",
    "jaccard",
    "stability_experiment",
    "fidelity_report",
    "StabilityReport",
    "FidelityReport",
    "ConlexError",
    "ConfigError",
    "SchemaError",
    "InsufficientData",
    "InvalidTrainingData",
    "DimensionError",
    "ModelUnavailable",
    "SingleClassNeighborhood",
    "SingularSystem",
    "DegenerateComponent",
    "IllConditioned",
]
