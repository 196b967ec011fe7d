import numpy as np
import pytest

from dppstat.geometry import Window


@pytest.fixture
def unit_square() -> Window:
    return Window.unit(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
