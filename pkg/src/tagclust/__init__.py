"""tagclust: information-maximization clustering with ILP-selected
per-cluster tag descriptions, coupled by self-generated together-pairs."""

from .data import (
    FeatureMatrix,
    ImputedTagMatrix,
    SyntheticSpec,
    TagMatrix,
    generate_synthetic,
    impute_tags,
    load_features,
    load_tags,
    standardize_features,
)
from .explain import ExplanationResult, compute_coverage, solve_with_beta_search
from .metrics import clustering_accuracy, nmi
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
