"""Generative forests for tabular data: density estimation, sampling and
missing-data imputation with ensembles of axis-parallel trees."""

from .data import Dataset, DataError, FeatureDomain, Schema, load_csv, synth_domain
from .forest import GenerativeForest, SplitPredicate, Tree
from .imputer import impute, impute_dataset, marginal_impute
from .measure import LOSSES, Support, get_loss
from .sampler import generate
from .trainer import TrainConfig, train

__all__ = [
    "Dataset", "DataError", "FeatureDomain", "Schema", "load_csv", "synth_domain",
    "GenerativeForest", "SplitPredicate", "Tree",
    "impute", "impute_dataset", "marginal_impute",
    "LOSSES", "Support", "get_loss",
    "generate", "TrainConfig", "train",
]
