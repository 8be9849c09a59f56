import time
from collections import namedtuple

import pytest

from flowprobe import TrainingConfig, train

TrainedField = namedtuple("TrainedField", "field trace seconds")


@pytest.fixture(scope="session")
def two_gaussians_field():
    """Trained two-gaussians field shared across the suite (defaults, seed 0)."""
    t0 = time.perf_counter()
    field, trace = train(TrainingConfig(seed=0))
    return TrainedField(field, trace, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def single_point_field():
    t0 = time.perf_counter()
    field, trace = train(
        TrainingConfig(
            dataset="single-point",
            batch_size=64,
            steps=4000,
            learning_rate=3e-3,
            seed=1,
        )
    )
    return TrainedField(field, trace, time.perf_counter() - t0)
