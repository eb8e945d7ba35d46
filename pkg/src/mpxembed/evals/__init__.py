from .baseline import mean_marker_baseline
from .batchfx import BatchEffectReport, batch_effect_score
from .cases import (
    case_cluster_features,
    case_knn_eval,
    fit_block_pca,
    knn_case_classify,
    mil_case_embed,
)
from .clustering import ClusterModel, ari, kmeans_fit, silhouette
from .densemap import dense_predict_map, morphological_cleanup
from .fewshot import (
    FEW_SHOT_SIZES,
    HUMAN_GUIDED_MIN_CELLS,
    HUMAN_GUIDED_SHOTS,
    ClassTooSmallError,
    few_shot_subset,
    human_guided_subsets,
)
from .metrics import MetricReport, aggregate_reports, classify_metrics, save_report
from .pca import PCAModel, pca_fit
from .probe import (
    FoldError,
    LinearClassifier,
    ProbeConfig,
    default_c_grid,
    fit_logreg,
    make_folds,
    probe_cv,
    probe_fold,
    train_val_split,
)
from .stats import mann_whitney_u

__all__ = [
    "BatchEffectReport", "ClassTooSmallError", "ClusterModel", "FEW_SHOT_SIZES",
    "FoldError", "HUMAN_GUIDED_MIN_CELLS", "HUMAN_GUIDED_SHOTS",
    "LinearClassifier", "MetricReport", "PCAModel", "ProbeConfig",
    "aggregate_reports", "ari", "batch_effect_score", "case_cluster_features",
    "case_knn_eval", "classify_metrics", "default_c_grid", "dense_predict_map",
    "few_shot_subset", "fit_block_pca", "fit_logreg", "human_guided_subsets",
    "kmeans_fit", "knn_case_classify", "make_folds", "mann_whitney_u",
    "mean_marker_baseline", "mil_case_embed", "morphological_cleanup",
    "pca_fit", "probe_cv", "probe_fold", "save_report", "silhouette",
    "train_val_split",
]
