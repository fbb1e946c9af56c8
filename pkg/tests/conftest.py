from pathlib import Path

import numpy as np
import pytest

from lcfrisk.fem import BoundaryConditions, assemble_and_solve, load_mesh
from lcfrisk.fem.meshgen import notched_bar
from lcfrisk.material import CmbParams, ElasticParams, Material, RambergOsgoodParams

DATA = Path(__file__).resolve().parents[1] / "src" / "lcfrisk" / "data"


def make_material(N_max=1e12):
    el = ElasticParams.from_young_poisson(200e3, 0.3)
    return Material(el, RambergOsgoodParams(200e3, 1200.0, 0.15), CmbParams(1000.0, 0.5, -0.09, -0.6),
                    N_max=N_max)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def material():
    return make_material()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def notched():
    """Clamped notched bar (hex8) pulled by 600 MPa on its free end."""
    mesh = notched_bar("hex8")
    mat = make_material()
    bc = BoundaryConditions({"fixed": (0, 1, 2)}, {"load": np.array([600.0, 0.0, 0.0])})
    u = assemble_and_solve(mesh, mat.elastic, bc)
    return mesh, mat, bc, u


@pytest.fixture(scope="session")
def patch_bar_mesh():
    return load_mesh(DATA / "bar_hex8.msh")
