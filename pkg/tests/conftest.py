import numpy as np
import pytest
from hypothesis import settings

from bbglm import dataset as ds
from bbglm.design import ModelSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def income():
    return ds.load_bundled("income")


@pytest.fixture(scope="session")
def vaso():
    data = ds.load_bundled("vaso")
    data = data.derive("lv", "log(volume)").derive("lr", "log(rate)")
    return data.derive("lt", "lv + lr")


@pytest.fixture(scope="session")
def absence():
    return ds.load_bundled("absence")


@pytest.fixture
def vaso_full():
    return ModelSpec(response="response", terms=("lv", "lr"))


@pytest.fixture
def vaso_common():
    return ModelSpec(response="response", terms=("lt",))


def make_logistic(rng, n=40, beta=(0.3, 1.0, -0.7)):
    X = np.column_stack([np.ones(n), rng.normal(size=(n, len(beta) - 1))])
    p = 1 / (1 + np.exp(-X @ np.asarray(beta)))
    return X, (rng.random(n) < p).astype(float)
