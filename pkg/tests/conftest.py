import numpy as np
import pytest
from hypothesis import settings

from causalsupport import BartConfig, Dataset, fit_bart, gen_example_1d

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


TINY_BART = BartConfig(num_trees=10, iterations=100, burn_in=40)


@pytest.fixture(scope="session")
def tiny_bart_config():
    return TINY_BART


@pytest.fixture(scope="session")
def small_study():
    return gen_example_1d(60, seed=7)


@pytest.fixture(scope="session")
def small_surface(small_study):
    return fit_bart(small_study.dataset, TINY_BART, seed=1)


def make_dataset(x, z, y, names=None):
    return Dataset(np.asarray(x, dtype=float), np.asarray(z),
                   np.asarray(y, dtype=float), names)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
