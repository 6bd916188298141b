import numpy as np
import pytest

from vulnscape.model import dataset_from_edi
from vulnscape.synthetic import (
    make_fixture_dir,
    packaged_catalog,
    synthetic_dataset,
    synthetic_edi,
    synthetic_registrations,
)


@pytest.fixture(scope="session")
def tight_dataset():
    """24 neighborhoods x 5 waves with cleanly separable 3-blob structure."""
    dataset, truth = synthetic_dataset(4, spread=1.2)
    return dataset, truth


@pytest.fixture(scope="session")
def diffuse_dataset():
    """The loose-blob regime used for the clustering-tendency bands."""
    dataset, truth = synthetic_dataset(0, spread=3.0)
    return dataset, truth


@pytest.fixture(scope="session")
def registrations():
    return synthetic_registrations(3)


@pytest.fixture(scope="session")
def catalog():
    return packaged_catalog()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data")
    make_fixture_dir(path, seed=0)
    return path


def blobs_5d(seed: int, n_per: int = 8, spread: float = 0.5,
             centers=None) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated Gaussian blobs in R^5 with known labels."""
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = np.array([
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [8.0, 8.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 8.0, 8.0, 8.0],
        ])
    points = np.vstack([rng.normal(c, spread, size=(n_per, len(c))) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n_per)
    return points, labels


def leave_one_out_1nn(points: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of points whose nearest neighbor shares their label."""
    from scipy.spatial.distance import cdist

    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    return float((labels[d.argmin(axis=1)] == labels).mean())


def adjusted_rand_index(a, b) -> float:
    from collections import Counter

    a, b = tuple(a), tuple(b)
    n = len(a)
    pairs = lambda c: sum(v * (v - 1) // 2 for v in c.values())
    pa, pb = pairs(Counter(a)), pairs(Counter(b))
    both = pairs(Counter(zip(a, b)))
    total = n * (n - 1) // 2
    expected = pa * pb / total
    denom = (pa + pb) / 2 - expected
    return 1.0 if denom == 0 else (both - expected) / denom
