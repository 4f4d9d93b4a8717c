import warnings

import numpy as np
import pytest

from stressfusion.data_model import Scheme
from stressfusion.features import assemble_subject_features, build_dataset
from stressfusion.ingest import generate_cohort

# A 40-score cohort with mean exactly 22 whose labels split 22/18 (two
# classes) and 12/19/9 (three classes), matching the reference study.
REFERENCE_SCORES = (
    [8, 10, 12, 13, 14, 15, 15, 16, 17, 17, 18, 18]
    + [19, 19, 20, 20, 21, 21, 22, 22, 22, 22]
    + [23, 23, 24, 24, 25, 25, 26, 26, 26]
    + [27, 28, 29, 30, 31, 32, 32, 33, 35]
)


@pytest.fixture(autouse=True)
def _quiet_constant_feature_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*constant feature")
        yield


@pytest.fixture(scope="session")
def small_cohort():
    """Twenty short synthetic subjects; cheap enough for module tests."""
    return generate_cohort(20, seed=11, duration_seconds=30.0)


@pytest.fixture(scope="session")
def small_datasets(small_cohort):
    vectors = [assemble_subject_features(r) for r in small_cohort]
    return {s: build_dataset(small_cohort, s, vectors=vectors) for s in Scheme}


def blobs(n_per_class, n_classes=2, d=2, sep=3.0, seed=0):
    """Gaussian clusters with centres spaced ``sep`` apart along every axis."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((n_per_class, d)) + sep * c for c in range(n_classes)])
    y = np.repeat(np.arange(n_classes), n_per_class)
    return X, y
