import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from viewplan.mesh import build_mesh

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def mesh_from(vertices, triangles):
    return build_mesh(np.asarray(vertices, float), np.asarray(triangles))[0]


@pytest.fixture
def unit_triangle():
    return mesh_from([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)])
