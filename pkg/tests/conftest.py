import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kowgyro.phase import Params  # noqa: E402


@pytest.fixture
def params():
    return Params(1.0, 0.6, 0.7)


@pytest.fixture
def params0():
    return Params(1.0, 0.6, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
