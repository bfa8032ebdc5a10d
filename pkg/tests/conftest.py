import numpy as np
import pytest

import fricflow as ff
from fricflow.spaces import shape_p2


@pytest.fixture(scope="session")
def spaces4():
    return ff.build_spaces(ff.MeshConfig(n=4))


@pytest.fixture(scope="session")
def spaces8():
    return ff.build_spaces(ff.MeshConfig(n=8))


def eval_velocity(spaces, coeffs, x, y):
    """Evaluate a velocity coefficient vector at a point via cell location.

    Independent of the trace machinery: locates the structured cell, picks
    the triangle from the diagonal split, and sums P2 shapes.
    """
    mesh = spaces.mesh
    cfg = mesh.config
    h = 1.0 / cfg.n
    ox0, oy0, ox1, oy1 = cfg.outer_box
    ncy = round((oy1 - oy0) * cfg.n)
    i = min(int((x - ox0) / h), round((ox1 - ox0) * cfg.n) - 1)
    j = min(int((y - oy0) / h), ncy - 1)
    cell = i * ncy + j
    s = (x - (ox0 + i * h)) / h
    t = (y - (oy0 + j * h)) / h
    if s >= t:
        tri = 2 * cell
        xi, eta = s - t, t
    else:
        tri = 2 * cell + 1
        xi, eta = s, t - s
    shp = shape_p2(np.array([[xi, eta]]))[0]
    nodes = spaces.vmap.tri_nodes[tri]
    vals = coeffs[np.stack([2 * nodes, 2 * nodes + 1], axis=1)]
    return shp @ vals


def h1_norm(spaces, coeffs):
    from fricflow.solver import h1_gram

    gram = h1_gram(spaces.mesh, spaces.vmap)
    return float(np.sqrt(coeffs @ (gram @ coeffs)))
