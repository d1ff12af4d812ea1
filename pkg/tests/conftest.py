import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vflpriv.dataset import SyntheticSpec, synthesize
from vflpriv.model import TrainConfig, VflSplit, train


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset():
    """Balanced two-class Gaussian clusters, 10 features, quick to train on."""
    return synthesize(SyntheticSpec(n=600, d_t=10, k=2, seed=7))


@pytest.fixture(scope="session")
def small_model(small_dataset):
    split = VflSplit.contiguous(10, 0, 5)
    return train(small_dataset, split, TrainConfig(seed=7, max_epochs=400))
