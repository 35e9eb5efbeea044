"""Hierarchical EDOS-style text classification with focal loss, k-fold training and ensembling."""

from .data import (Dataset, DatasetStats, Example, FoldAssignment, SplitSpec, class_weights,
                   dataset_stats, load_dataset, stratified_kfold, stratified_split)
from .ensemble import grid_search_weights, majority_vote, weighted_average
from .evaluation import confusion_matrix, evaluate_run, hierarchy_violations, metrics
from .features import FeaturizerConfig, fit_featurizer, preprocess, transform
from .model import (FocalLossConfig, Model, ModelParams, TrainConfig, adam_step, focal_loss,
                    forward_probs, load_model, loss_and_gradient, predict, save_model, train)
from .predictions import PredictionSet, read_predictions, write_predictions
from .taxonomy import (CategoryLabel, Level, TaskALabel, VectorLabel, check_consistency,
                       parent_of, parse_label)

__version__ = "0.1.0"

__all__ = [
    "CategoryLabel", "Dataset", "DatasetStats", "Example", "FocalLossConfig", "FoldAssignment",
    "FeaturizerConfig", "Level", "Model", "ModelParams", "PredictionSet", "SplitSpec",
    "TaskALabel", "TrainConfig", "VectorLabel", "adam_step", "check_consistency", "class_weights",
    "confusion_matrix", "dataset_stats", "evaluate_run", "fit_featurizer", "focal_loss",
    "forward_probs", "grid_search_weights", "hierarchy_violations", "load_dataset", "load_model",
    "loss_and_gradient", "majority_vote", "metrics", "parent_of", "parse_label", "predict",
    "preprocess", "read_predictions", "save_model", "stratified_kfold", "stratified_split",
    "train", "transform", "weighted_average", "write_predictions",
]
