import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dcffsnet import NetworkConfig, Tensor, build_network, seeded_weights
from dcffsnet.ops import ConvParams

settings.register_profile(
    "default", deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TINY_CHANNELS = (8, 16, 24, 32, 40)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_cfg():
    return NetworkConfig(input_size=(32, 32),
                         encoder_channels=TINY_CHANNELS).validate()


@pytest.fixture(scope="session")
def tiny_store(tiny_cfg):
    return seeded_weights(tiny_cfg, seed=2024)


@pytest.fixture(scope="session")
def tiny_net(tiny_cfg, tiny_store):
    return build_network(tiny_cfg, tiny_store)


@pytest.fixture(scope="session")
def oracle_warm():
    """Trigger the oracle's JIT compilation outside any timed section."""
    from dcffsnet import oracle
    x = Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))
    p = ConvParams(Tensor(np.ones((1, 1, 3, 3), dtype=np.float32)), padding=1)
    oracle.naive_conv2d(x, p)
    return True
