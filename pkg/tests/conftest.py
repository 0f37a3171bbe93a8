import numpy as np
import pytest

from sparsecd.graph import GraphicalModel

SEVEN_VERTEX_EDGES = [(1, 2), (2, 3), (3, 4), (4, 7), (7, 6), (6, 3), (2, 5)]


@pytest.fixture
def seven_vertex():
    return GraphicalModel(7, frozenset(SEVEN_VERTEX_EDGES))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel_diff(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)
