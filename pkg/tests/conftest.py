import numpy as np
import pytest

from quenchlab.core import Grid, ScalarField


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid: Grid, rng, scale=1.0) -> ScalarField:
    return ScalarField(grid, scale * rng.standard_normal(grid.shape))
