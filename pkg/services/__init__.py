# services/__init__.py
"""
Numerical services of the cluster-entropy pipeline.

This package aggregates the pipeline stages so they can be imported
conveniently from `services`, for example:

    from services import logger, fit_pca, fit_kmeans, cluster_entropy
"""

from .logger import logger
from .seeding import derive_seed
from .pca import (
    PcaModel,
    fit_pca,
    fit_pca_joint,
    transform,
    reconstruct,
)
from .cluster import (
    Assignment,
    KMeansModel,
    seed_plus_plus,
    lloyd,
    fit_kmeans,
    assign,
    inertia_of,
)
from .entropy import (
    GroupEntropy,
    RankedSelection,
    group_histograms,
    cluster_entropy,
    compute_entropies,
    rank_groups,
    select_wsi,
    entropy_table,
)
from .simbench import (
    SimConfig,
    SimTruth,
    generate,
    truth_diversity,
    load_sim_config,
)
from .classifier import (
    Classifier,
    TrainConfig,
    loss_and_grad,
    rebalance,
    train,
)
from .metrics import (
    EvalReport,
    evaluate,
    report_from_confusion,
    report_from_predictions,
)
from .stats import (
    welch_test,
    bonferroni,
)
from .experiment import (
    CONDITIONS,
    ExperimentConfig,
    ExperimentSummary,
    run_experiment,
    split_target,
    summary_table,
)

__all__ = [
    "logger",
    "derive_seed",
    "PcaModel",
    "fit_pca",
    "fit_pca_joint",
    "transform",
    "reconstruct",
    "Assignment",
    "KMeansModel",
    "seed_plus_plus",
    "lloyd",
    "fit_kmeans",
    "assign",
    "inertia_of",
    "GroupEntropy",
    "RankedSelection",
    "group_histograms",
    "cluster_entropy",
    "compute_entropies",
    "rank_groups",
    "select_wsi",
    "entropy_table",
    "SimConfig",
    "SimTruth",
    "generate",
    "truth_diversity",
    "load_sim_config",
    "Classifier",
    "TrainConfig",
    "loss_and_grad",
    "rebalance",
    "train",
    "EvalReport",
    "evaluate",
    "report_from_confusion",
    "report_from_predictions",
    "welch_test",
    "bonferroni",
    "CONDITIONS",
    "ExperimentConfig",
    "ExperimentSummary",
    "run_experiment",
    "split_target",
    "summary_table",
]
