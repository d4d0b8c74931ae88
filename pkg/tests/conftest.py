import numpy as np
import pytest

from critwave.core import FieldState, RadialGrid
from helpers import bump


@pytest.fixture
def fine_grid():
    return RadialGrid.from_extent(10.0, 1e-3)


@pytest.fixture
def smooth_state():
    grid = RadialGrid.from_extent(10.0, 1e-3)
    r = grid.r
    return FieldState(grid, bump(r, 0.0, 3.0) + 0.5 * bump(r, 4.0, 1.5), r * bump(r, 2.0, 1.0))
