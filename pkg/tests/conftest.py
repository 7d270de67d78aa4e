import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import tangent_topo as tt


@pytest.fixture(scope="session")
def cube_phat():
    poly = tt.builtin_polyhedron("cube")
    return tt.truncate(poly, tt.TruncationSpec.from_fraction(poly, 0.25))


@pytest.fixture(scope="session")
def tetra_phat():
    poly = tt.builtin_polyhedron("tetrahedron")
    return tt.truncate(poly, tt.TruncationSpec.from_fraction(poly, 0.25))


@pytest.fixture(scope="session")
def octa_phat():
    poly = tt.builtin_polyhedron("octahedron")
    return tt.truncate(poly, tt.TruncationSpec.from_fraction(poly, 0.25))
