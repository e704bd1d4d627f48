import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fieldnav.field import FieldParams
from fieldnav.grid import GridSpec, OccupancyGrid, OrientedBox, rasterize_boxes
from fieldnav.sim import default_agent


@pytest.fixture
def params():
    return FieldParams()


@pytest.fixture
def agent():
    return default_agent()


@pytest.fixture
def small_spec():
    return GridSpec(np.zeros(3), 0.1, (12, 12, 12))


def make_wall_scene(spec: GridSpec, gap_lo: int, gap_hi: int, wall_x: int) -> OccupancyGrid:
    """Full y-z wall at one x index with a free window in y."""
    occ = np.zeros(spec.shape, dtype=bool)
    occ[wall_x, :, :] = True
    occ[wall_x, gap_lo:gap_hi, :] = False
    return OccupancyGrid(spec, occ)


def random_box_grid(spec: GridSpec, rng: np.random.Generator, n_boxes: int = 3) -> OccupancyGrid:
    """A few random axis-aligned boxes rasterized into the grid."""
    ext = spec.extent
    boxes = []
    for _ in range(n_boxes):
        center = rng.uniform(0.2, 0.8, 3) * ext
        half = rng.uniform(0.08, 0.22, 3) * ext.min()
        boxes.append(OrientedBox(center, half, np.eye(3)))
    return rasterize_boxes(spec, boxes)
