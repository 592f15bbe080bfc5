import numpy as np
import pytest

from pwlink.constellation import build_qam


@pytest.fixture(scope="session")
def qam16():
    return build_qam(16)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
