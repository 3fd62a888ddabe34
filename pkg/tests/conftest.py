"""
Shared pytest fixtures and configuration
"""
import json
from pathlib import Path

import numpy as np
import pytest

from gradpen.config import Settings
from gradpen.services.fem import ScalarField
from gradpen.services.mesh import Mesh, generate_disk, generate_lshape, generate_rectangle
from gradpen.services.problem import ProblemSpec


@pytest.fixture
def mock_settings():
    """Settings that ignore the environment and any .env file"""
    return Settings(_env_file=None, output_dir="test-results", log_level="DEBUG")


@pytest.fixture
def unit_square():
    """[0, 1]^2 split by one diagonal"""
    return generate_rectangle(1.0, 1.0, 0)


@pytest.fixture
def refined_square():
    return generate_rectangle(1.0, 1.0, 1)


@pytest.fixture
def free_square():
    """Unit square with no Dirichlet vertices, for testing integrands on fields that are not zero on the boundary"""
    base = generate_rectangle(1.0, 1.0, 1)
    return Mesh(
        vertices=base.vertices,
        triangles=base.triangles,
        boundary_vertex_flags=np.zeros(base.num_vertices, dtype=bool),
        boundary_edges=np.zeros((0, 2), dtype=np.int64),
        domain_tag="custom",
    )


@pytest.fixture(scope="session")
def disk_meshes():
    """Unit disk meshes at refinement levels 0 to 4"""
    return {k: generate_disk(k) for k in range(5)}


@pytest.fixture
def disk3(disk_meshes):
    return disk_meshes[3]


@pytest.fixture
def lshape2():
    return generate_lshape(2)


@pytest.fixture
def torsion_spec(disk3):
    """h = 4 on the unit disk, zero boundary value"""
    return ProblemSpec(mesh=disk3, h=4.0, g=0.0, p=2.0)


@pytest.fixture
def bubble_field(disk3):
    """Smooth field vanishing on the circle with |grad u| below one"""
    rng = np.random.default_rng(7)
    x, y = disk3.vertices[:, 0], disk3.vertices[:, 1]
    values = 0.45 * (1.0 - x**2 - y**2) + 0.01 * rng.normal(size=disk3.num_vertices)
    values[disk3.boundary_vertex_flags] = 0.0
    return ScalarField(disk3, values)


@pytest.fixture
def write_config(tmp_path):
    """Write a JSON run configuration and return its path"""

    def _write(data, name="config.json") -> Path:
        path = tmp_path / name
        with path.open("w") as f:
            json.dump(data, f)
        return path

    return _write
