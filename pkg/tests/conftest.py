import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile(
    "numeric", deadline=None, max_examples=25,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("numeric")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mesh8():
    from fracvar.mesh import Mesh1D

    return Mesh1D(0.0, 1.0, 8)


@pytest.fixture(scope="session")
def mesh16():
    from fracvar.mesh import Mesh1D

    return Mesh1D(0.0, 1.0, 16)


@pytest.fixture(scope="session")
def kernel_sp():
    from fracvar.kernels import standard_kernel

    return standard_kernel(0.5, 2.0)
