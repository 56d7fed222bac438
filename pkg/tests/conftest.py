import numpy as np
import pytest

from floodopt.core import FlowState, PhysicsParams, SimGrid
from floodopt.solver import SolverConfig


@pytest.fixture
def flat_grid():
    """Small flat 3x3-compatible grid, 50 m cells."""
    ny = nx = 8
    return SimGrid(nx=nx, ny=ny, dx=50.0, dy=50.0,
                   bed=np.zeros((ny, nx)), manning=np.full((ny, nx), 0.02))


@pytest.fixture
def quiet_physics():
    """No Coriolis, moderate CFL; convenient for pure-flux tests."""
    return PhysicsParams(cfl=0.45, latitude_deg=0.0)


def make_grid(bed, dx=50.0, manning=0.02, origin=(0.0, 0.0)):
    bed = np.asarray(bed, dtype=float)
    ny, nx = bed.shape
    return SimGrid(nx=nx, ny=ny, dx=dx, dy=dx, bed=bed,
                   manning=np.full((ny, nx), manning),
                   origin_x=origin[0], origin_y=origin[1])


def channel_1d(nx, dx, bed_profile, manning=1e-6, ny=3):
    """Pseudo-1D grid: ny identical rows of the given bed profile."""
    bed = np.tile(np.asarray(bed_profile, dtype=float), (ny, 1))
    return make_grid(bed, dx=dx, manning=manning)


def state_from_depth(h, grid, u=0.0, v=0.0, t=0.0):
    h = np.broadcast_to(np.asarray(h, dtype=float), grid.shape).copy()
    return FlowState(h, h * u, h * v, t)
