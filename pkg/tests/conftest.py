import numpy as np
import pytest

from genforest.data import CATEGORICAL, REAL, Dataset, dataset_from_rows
from genforest.trainer import TrainConfig, train


@pytest.fixture
def toy2d() -> Dataset:
    """Eight hand-placed 2D rows with structure on both axes."""
    rows = [
        [0.10, 0.20], [0.15, 0.25], [0.20, 0.80], [0.30, 0.85],
        [0.70, 0.15], [0.80, 0.25], [0.85, 0.75], [0.90, 0.90],
    ]
    return dataset_from_rows(["x", "y"], [REAL, REAL], rows)


@pytest.fixture
def mixed_ds() -> Dataset:
    """Small mixed numeric/categorical dataset, including a missing cell."""
    rows = [
        [0.1, "a"], [0.2, "a"], [0.3, "b"], [0.4, "b"], [0.5, "c"],
        [0.6, "a"], [0.7, None], [0.8, "c"], [0.9, "b"], [1.0, "a"],
    ]
    return dataset_from_rows(["v", "k"], [REAL, CATEGORICAL], rows)


@pytest.fixture
def toy_forest(toy2d):
    forest, history = train(toy2d, TrainConfig(n_trees=2, n_splits=3, seed=0))
    return forest, history


def random_dataset(rng: np.random.Generator, m: int = 30) -> Dataset:
    xs = rng.uniform(0.0, 1.0, size=m)
    ys = rng.normal(0.0, 1.0, size=m)
    return dataset_from_rows(
        ["x", "y"], [REAL, REAL], [[float(a), float(b)] for a, b in zip(xs, ys)]
    )
