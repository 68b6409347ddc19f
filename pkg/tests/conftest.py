import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dasa import TwoLevelParams, basis_state  # noqa: E402

# high-precision (mpmath, 40 digits) roots of the gamma1 cubic
G3_10_095 = 0.0092344792398029228
ROOTS_001_025 = (0.24743218447689287, 0.25259626019679642, 3.9999715553263107)


@pytest.fixture
def h1_params():
    return TwoLevelParams.from_values(0.0, G3_10_095, -10.0, -0.95)


@pytest.fixture
def h2_params():
    return TwoLevelParams.from_values(-0.01, ROOTS_001_025[2], 0.0, -0.25)


@pytest.fixture
def ground2():
    return basis_state(2, 1)


@pytest.fixture
def target2():
    return basis_state(2, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
