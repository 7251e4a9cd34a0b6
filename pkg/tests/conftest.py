import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plapflow.mesh import unit_square_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mesh4():
    return unit_square_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return unit_square_mesh(8)
