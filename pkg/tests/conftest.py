import numpy as np
import pytest

from actiongrid.growing_grid import GridConfig
from actiongrid.label_layer import LabelConfig
from actiongrid.pipeline import PipelineConfig, train_pipeline
from actiongrid.preprocess import PreprocessConfig
from actiongrid.skeleton import generate_synthetic


def small_gg_config(**overrides) -> PipelineConfig:
    base = dict(
        preprocess=PreprocessConfig(),
        layer1=GridConfig(sigma=10.0, gamma=25, rng_seed=1),
        layer2=GridConfig(sigma=10.0, gamma=16, rng_seed=2),
        label=LabelConfig(epochs=60, rng_seed=3),
        backend="gg",
        layer1_epochs=12,
        layer2_epochs=30,
        shuffle_seed=5,
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic(3, 8, 15, (20, 30), 0.01, 7)


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset):
    return train_pipeline(small_gg_config(), tiny_dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
