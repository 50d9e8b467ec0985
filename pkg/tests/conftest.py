"""Shared meshes and problems; module-scoped because meshes are immutable."""
import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fem.domain import BoundaryPartitionRule
from fem.measure import MeasureData
from fem.mesh import generate_disk_mesh, generate_square_mesh
from fem.problem import ProblemSpec

UPPER_ARC = BoundaryPartitionRule(kind="angular-split", theta0=math.pi)


@pytest.fixture(scope="session")
def disk_mesh():
    return generate_disk_mesh(1.0, 0.2)


@pytest.fixture(scope="session")
def split_disk_mesh():
    return generate_disk_mesh(1.0, 0.2, UPPER_ARC)


@pytest.fixture(scope="session")
def fine_split_disk_mesh():
    return generate_disk_mesh(1.0, 0.1, UPPER_ARC)


@pytest.fixture(scope="session")
def square_mesh():
    return generate_square_mesh(0.125)


@pytest.fixture
def dirac_problem(disk_mesh):
    """Unit source at the center (mass -1 under the load sign), full Dirichlet."""
    return ProblemSpec(gamma=2.0, alpha=0.0, mesh=disk_mesh, mu1=MeasureData.dirac((0.0, 0.0), -1.0))


@pytest.fixture
def mixed_problem(split_disk_mesh):
    """Interior plus boundary Dirac with gamma = 3 on the upper-arc partition."""
    return ProblemSpec(
        gamma=3.0, alpha=0.0, mesh=split_disk_mesh,
        mu1=MeasureData.dirac((0.0, -0.4), 1.0),
        mu2=MeasureData.dirac((0.0, 1.0), 1.0, support="gamma2"),
        partition=UPPER_ARC,
    )
