import numpy as np
import pytest

from ale2fluid.mesh import build_structured_mesh
from ale2fluid.params import PhysicalParams
from ale2fluid.solver import State


def gravity_params(**kw):
    base = dict(rho1=1.0, rho2=0.91, eta1=0.01, eta2=0.0091, g=100.0)
    base.update(kw)
    return PhysicalParams(**base)


def gravity_mesh(nx=8, ny=4, slope=0.2):
    return build_structured_mesh((-2.0, 2.0, 0.0, 2.0), nx, ny,
                                 [lambda x: slope * x + 1.0], motion_axis=1)


def flat_mesh(nx=8, ny=4):
    return build_structured_mesh((-2.0, 2.0, 0.0, 2.0), nx, ny,
                                 [lambda x: 1.0], motion_axis=1)


def couette_mesh(nx=16, ny=4, H=2.0, L=2.0):
    return build_structured_mesh((0.0, 4 * L, 0.0, H), nx, ny,
                                 [lambda y: L, lambda y: 3 * L],
                                 motion_axis=0, periodic=True)


def rest_state(mesh, time=0.0):
    return State(velocity=np.zeros(2 * mesh.n_nodes),
                 pressure=np.zeros(3 * mesh.n_cells), mesh=mesh, time=time)


@pytest.fixture(scope="session")
def mesh_8x4():
    return gravity_mesh()


@pytest.fixture(scope="session")
def flat_8x4():
    return flat_mesh()
