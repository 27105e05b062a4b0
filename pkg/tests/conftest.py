import numpy as np
import pytest

from vemsupg.mesh import Mesh, generate


def unit_square():
    return Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])


def two_squares():
    verts = [[0, 0], [0.5, 0], [1, 0], [1, 1], [0.5, 1], [0, 1]]
    return Mesh(verts, [[0, 1, 4, 5], [1, 2, 3, 4]])


@pytest.fixture
def square():
    return unit_square()


@pytest.fixture
def pair():
    return two_squares()


_MESHES = {}


def cached_mesh(family, n):
    key = (family, n)
    if key not in _MESHES:
        _MESHES[key] = generate(family, n)
    return _MESHES[key]


def random_cells(count, seed=0):
    """(mesh, cell index) pairs drawn from all four families."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        fam = ("m1", "m2", "m3", "m4")[rng.integers(4)]
        mesh = cached_mesh(fam, 5)
        out.append((mesh, int(rng.integers(mesh.n_cells))))
    return out
