import numpy as np
import pytest

from phasecast.channel import VmfParams, channel_params_vmf


@pytest.fixture(scope="session")
def ref():
    return VmfParams(kappa=1.0, phi=0.1)


@pytest.fixture(scope="session")
def ref_params(ref):
    return channel_params_vmf(ref)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
