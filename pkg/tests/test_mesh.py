import math

import numpy as np
import pytest

from bsemwave.mesh import (
    CouplingError, MeshError, boundary_corners, boundary_lengths, build_structured_mesh, dump_mesh,
    element_geometry,
)


@pytest.mark.parametrize("nx,ny,p", [(1, 1, 1), (10, 10, 4), (4, 3, 7)])
def test_counts(nx, ny, p):
    m = build_structured_mesh((0, 2, 0, 1), nx, ny, p)
    assert m.n_nodes == (nx * p + 1) * (ny * p + 1)
    assert len(m.elements) == nx * ny
    assert len(m.boundary_elements) == 2 * (nx + ny)
    assert m.n_boundary == 2 * (nx + ny) * p
    assert len(np.unique(m.elements)) == m.n_nodes
    # loop nodes are numbered last
    assert np.array_equal(m.boundary_nodes, np.arange(m.n_nodes - m.n_boundary, m.n_nodes))


def test_loop_is_counter_clockwise_and_closed():
    m = build_structured_mesh((0, 2.4, 0, 2.4), 10, 10, 3)
    xy = m.nodes[m.boundary_nodes]
    area = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
    assert area == pytest.approx(2.4**2)
    be = m.boundary_elements
    assert np.all(be[1:, 0] == be[:-1, -1]) and be[0, 0] == be[-1, -1]
    assert np.allclose(boundary_lengths(m), 0.24)
    corners = boundary_corners(m)
    assert len(corners) == 4 and all(math.isclose(a, math.pi / 2) for a in corners.values())


def test_element_nodes_are_tensor_lgl():
    m = build_structured_mesh((0, 1, 0, 1), 1, 1, 4)
    r = m.rule
    xy = m.nodes[m.elements[0]].reshape(5, 5, 2)
    assert np.allclose(xy[0, :, 0], 0.5 * (r.nodes + 1))
    assert np.allclose(xy[:, 0, 1], 0.5 * (r.nodes + 1))


def test_geometry_and_permutation(tmp_path):
    m = build_structured_mesh((0, 2, 0, 1), 2, 1, 3)
    g = element_geometry(m)
    assert g is not None
    perm = np.random.default_rng(0).permutation(m.n_nodes)
    pm = m.permuted(perm)
    assert np.allclose(pm.nodes[pm.elements], m.nodes[m.elements])
    dump_mesh(m, tmp_path / "m.txt")
    text = (tmp_path / "m.txt").read_text()
    assert text.startswith("# order 3\nnodes 28\n") and "boundary_elements 6" in text


def test_errors():
    with pytest.raises(MeshError):
        build_structured_mesh((0, 1, 0, 1), 0, 1, 2)
    with pytest.raises(MeshError):
        build_structured_mesh((1, 1, 0, 1), 1, 1, 2)
    m = build_structured_mesh((0, 1, 0, 1), 1, 1, 2)
    bad = type(m)(m.p, m.nodes, m.elements, m.boundary_elements, np.concatenate([m.boundary_nodes[:1], m.boundary_nodes[:-1]]))
    with pytest.raises(CouplingError):
        bad.boundary_trace()
