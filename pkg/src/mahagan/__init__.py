"""Augmentation for imbalanced regression.

Three-stage pipeline: Mahalanobis-GMM minority detection, WGAN-GP
candidate generation, and deterministic Mahalanobis nearest-neighbour
matching, plus the evaluation stack (RMSE, SERA, utility-based F1,
Wilcoxon win tables) and a CLI.
"""

from .dataset import (
    JointDataset,
    SplitPlan,
    Standardizer,
    load_csv,
    make_splits,
    standardize,
    write_csv,
)
from .errors import DataError, MahaganError, NumericalError
from .estimators import MahalanobisGanAugmenter, MinorityDetector
from .harness import (
    EvalReport,
    ExperimentConfig,
    export_diagnostics,
    knn_regressor_fit_predict,
    random_oversample,
    run_experiment,
    summary_table,
)
from .mahalanobis import (
    GaussianStats,
    fit_gaussian,
    pairwise_distance,
    squared_distance_from_mean,
    squared_distances_from_mean,
)
from .matching import MatchConfig, MatchResult, assemble_augmented, match
from .metrics import (
    MetricReport,
    RelevanceFunction,
    UtilityConfig,
    WilcoxonResult,
    build_relevance,
    compute_report,
    f_phi,
    rmse,
    sera,
    utility,
    wilcoxon_signed_rank,
)
from .minority import MixtureSplit, detect_minority, fit_em, solve_threshold
from .pipeline import AugmentationArtifacts, augment_dataset
from .wgan import (
    GanConfig,
    TrainedGan,
    critic_loss,
    generator_loss,
    sample_pool,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationArtifacts",
    "DataError",
    "EvalReport",
    "ExperimentConfig",
    "GanConfig",
    "GaussianStats",
    "JointDataset",
    "MahaganError",
    "MahalanobisGanAugmenter",
    "MatchConfig",
    "MatchResult",
    "MetricReport",
    "MinorityDetector",
    "MixtureSplit",
    "NumericalError",
    "RelevanceFunction",
    "SplitPlan",
    "Standardizer",
    "TrainedGan",
    "UtilityConfig",
    "WilcoxonResult",
    "assemble_augmented",
    "augment_dataset",
    "build_relevance",
    "compute_report",
    "critic_loss",
    "detect_minority",
    "export_diagnostics",
    "f_phi",
    "fit_em",
    "fit_gaussian",
    "generator_loss",
    "knn_regressor_fit_predict",
    "load_csv",
    "make_splits",
    "match",
    "pairwise_distance",
    "random_oversample",
    "rmse",
    "run_experiment",
    "sample_pool",
    "sera",
    "solve_threshold",
    "squared_distance_from_mean",
    "squared_distances_from_mean",
    "standardize",
    "summary_table",
    "train",
    "utility",
    "wilcoxon_signed_rank",
    "write_csv",
]
