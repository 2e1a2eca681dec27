"""Evaluation: cross-validation, sweeps, feature ranking and projection."""

from .cv import (CVConfig, EvalReport, Summary, confusion_counts, group_folds, misclassification_summary,
                 report_from_dict, row_percent, run_cv, stratified_folds, subject_of)
from .projection import PCAResult, pca_project
from .ranking import (RankedFeature, display_name, entropy_bits, equal_frequency_bins, information_gain,
                      rank_information_gain, ranking_csv)
from .sweep import SweepTable, dataset_for_spec, pooled_std, sweep_datasets, sweep_situations

__all__ = [
    "CVConfig", "EvalReport", "PCAResult", "RankedFeature", "Summary", "SweepTable", "confusion_counts",
    "dataset_for_spec", "display_name", "entropy_bits", "equal_frequency_bins", "group_folds",
    "information_gain", "misclassification_summary", "pca_project", "pooled_std", "rank_information_gain",
    "ranking_csv", "report_from_dict", "row_percent", "run_cv", "stratified_folds", "subject_of",
    "sweep_datasets", "sweep_situations",
]
