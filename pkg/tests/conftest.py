"""Shared fixtures: a mid-sized synthetic dataset and a trained tree.

The full 100k dataset is only built inside the acceptance tests that need
it; everything else runs against a 20k sample, which trains in about a
second and exercises the same code paths.
"""

import os

import pytest

from recourselab.dataset import synthesize
from recourselab.schema import default_schema
from recourselab.tree import train

from hypothesis import settings

settings.register_profile("thorough", max_examples=1000)
settings.register_profile("dev", max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def dataset20k():
    return synthesize(20_000, seed=7)


@pytest.fixture(scope="session")
def tree20k(dataset20k):
    tree, accuracy = train(dataset20k, split_seed=7)
    assert accuracy > 0.95
    return tree
