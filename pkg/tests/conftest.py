"""
Fixtures partagées: maillages coupés de petite taille.
"""
import numpy as np
import pytest

from app.models.mesh import GridSpec
from app.problems.circle import CircleProblem
from app.services.mesh_service import build_cut_mesh
from tests.helpers import SQUARE, line_interface


@pytest.fixture(scope="session")
def plain_mesh():
    return build_cut_mesh(GridSpec.from_h(SQUARE, 0.25), None)


@pytest.fixture(scope="session")
def circle_mesh():
    return build_cut_mesh(GridSpec.from_h(SQUARE, 0.25), CircleProblem().interface())


@pytest.fixture(scope="session")
def circle_mesh_fine():
    return build_cut_mesh(GridSpec.from_h(SQUARE, 1.0 / 16), CircleProblem().interface())


@pytest.fixture(scope="session")
def line_mesh():
    return build_cut_mesh(GridSpec.from_h(SQUARE, 0.25), line_interface(0.3))


@pytest.fixture(scope="session")
def sliver_mesh():
    return build_cut_mesh(GridSpec.from_h(SQUARE, 1.0 / 16), line_interface(1e-7))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
