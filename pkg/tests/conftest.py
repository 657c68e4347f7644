import numpy as np
import pytest

from updp.model import ModelConfig, init_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_model():
    cfg = ModelConfig(d_in=5, num_clusters=3, context_length=4, d_w=4, d_h=6, d_z=4, precision="f64")
    return init_model(cfg, seed=1)
