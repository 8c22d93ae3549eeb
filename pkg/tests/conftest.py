import numpy as np
import pytest

from graphclean.datasets import Dataset, save_bundle
from graphclean.operators import WeightVector


def tiny_dataset():
    """Six nodes, two classes, a hand-written graph with one cross edge."""
    features = np.array([
        [1.0, 0.0], [1.2, 0.1], [0.9, -0.1],
        [0.0, 1.0], [0.1, 1.2], [-0.1, 0.9],
    ])
    labels = np.array([0, 0, 0, 1, 1, 1])
    weights = np.zeros(15)
    # edges (0,1), (0,2), (1,2), (3,4), (3,5), (4,5), plus cross edge (2,3)
    for u, v in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]:
        k = (v + 1 - (u + 1)) + u * (2 * 6 - (u + 1)) // 2
        weights[k - 1] = 1.0
    return Dataset(features=features, labels=labels,
                   graph=WeightVector(n=6, values=weights), num_classes=2)


@pytest.fixture
def small_dataset():
    return tiny_dataset()


@pytest.fixture
def bundle_dir(tmp_path, small_dataset):
    path = tmp_path / "bundle"
    save_bundle(small_dataset, path)
    return path
