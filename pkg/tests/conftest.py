import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sylva.geometry import Rect  # noqa: E402
from sylva.presets import default_generators, default_library  # noqa: E402
from sylva.procgen import generate_forest  # noqa: E402
from sylva.voxelgrid import voxelize_scene  # noqa: E402


@pytest.fixture(scope="session")
def library():
    return default_library()


@pytest.fixture(scope="session")
def small_scene(library):
    """A 30 m x 30 m forest shared by tests that need real geometry."""
    return generate_forest(Rect(0, 0, 30, 30), default_generators(), library, rng_seed=11)


@pytest.fixture(scope="session")
def small_grid(small_scene, library):
    return voxelize_scene(small_scene, library, voxel_size=0.2)


def assert_clouds_bitwise_equal(a, b):
    assert len(a) == len(b)
    av = a.points.view(np.uint8).reshape(len(a), -1)
    bv = b.points.view(np.uint8).reshape(len(b), -1)
    assert np.array_equal(av, bv)
