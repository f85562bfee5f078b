import itertools

import numpy as np
import pytest

from stslab.spatial_fe import (
    QLagrangeElement,
    SpatialAssembler,
    SpatialDoFHandler,
    boundary_dofs,
    build_spatial_sparsity,
    cell_jacobian,
    make_hypercube_mesh,
    refine_uniform,
)


def dof_handler(dim, level, s):
    return SpatialDoFHandler(make_hypercube_mesh(dim, level), QLagrangeElement(s, dim))


def test_mesh_examples():
    m = make_hypercube_mesh(2, 0)
    assert m.n_cells == 1 and m.n_vertices == 4
    assert make_hypercube_mesh(2, 2).n_cells == 16
    m = make_hypercube_mesh(1, 3)
    assert m.n_cells == 8 and m.n_vertices == 9
    with pytest.raises(ValueError):
        make_hypercube_mesh(3, 1)


def test_refine_uniform():
    m = make_hypercube_mesh(2, 0)
    assert refine_uniform(m).n_cells == 4
    m = make_hypercube_mesh(2, 2)
    fine = refine_uniform(m)
    assert fine.n_cells == 64
    n = m.n_per_dim
    assert m.n_vertices == (n + 1) ** 2 and fine.n_vertices == (2 * n + 1) ** 2


@pytest.mark.parametrize("dim,level", [(1, 0), (1, 3), (2, 0), (2, 3)])
def test_cells_tile_unit_cube(dim, level):
    m = make_hypercube_mesh(dim, level)
    assert m.measure() == pytest.approx(1.0, abs=1e-12)
    # every interior face has exactly one neighbour
    seen = {tuple(c) for c in m.cells}
    assert len(seen) == m.n_cells
    for c in m.cells:
        for axis in range(dim):
            for step in (-1, 1):
                nb = c.copy()
                nb[axis] += step
                inside = 0 <= nb[axis] < m.n_per_dim
                assert (tuple(nb) in seen) == inside


def test_boundary_faces():
    m = make_hypercube_mesh(2, 1)
    assert sorted(m.boundary_faces(0)) == [(0, 0), (1, 0)]
    assert sorted(m.boundary_faces(3)) == [(0, 1), (1, 1)]


def test_q1_shape_examples():
    e = QLagrangeElement(1, 2)
    for a, corner in enumerate(e.reference_nodes):
        assert e.shape_value(a, corner) == pytest.approx(1.0)
    assert e.shape_value(0, [0.5, 0.5]) == pytest.approx(0.25)
    q2 = QLagrangeElement(2, 1)
    assert q2.shape_value(1, [0.5]) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        e.shape_value(4, [0.5, 0.5])


@pytest.mark.parametrize("s", [1, 2, 3, 4])
@pytest.mark.parametrize("dim", [1, 2])
def test_element_nodal_and_partition_of_unity(s, dim):
    e = QLagrangeElement(s, dim)
    np.testing.assert_allclose(e.values(e.reference_nodes), np.eye(e.n_dofs), atol=1e-12)
    pts = np.random.default_rng(s).random((30, dim))
    np.testing.assert_allclose(e.values(pts).sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(e.gradients(pts).sum(axis=1), 0.0, atol=1e-10)


@pytest.mark.parametrize("s", [1, 2, 3])
@pytest.mark.parametrize("dim", [1, 2])
def test_gradients_match_finite_differences(s, dim):
    e = QLagrangeElement(s, dim)
    pts = np.random.default_rng(7).uniform(0.1, 0.9, (10, dim))
    step = 1e-6
    g = e.gradients(pts)
    for d in range(dim):
        shift = np.zeros(dim)
        shift[d] = step
        fd = (e.values(pts + shift) - e.values(pts - shift)) / (2 * step)
        np.testing.assert_allclose(fd, g[:, :, d], atol=1e-6)


def test_cell_jacobian_examples():
    assert cell_jacobian(make_hypercube_mesh(2, 0), 0)[0] == 1.0
    det, inv = cell_jacobian(make_hypercube_mesh(2, 2), 5)
    assert det == pytest.approx(1 / 16)
    np.testing.assert_allclose(inv, [4.0, 4.0])
    assert cell_jacobian(make_hypercube_mesh(1, 3), 2)[0] == pytest.approx(1 / 8)


@pytest.mark.parametrize("dim,level,s", [(1, 2, 1), (2, 2, 1), (2, 2, 2), (2, 1, 3)])
def test_dof_count_and_continuity(dim, level, s):
    dof = dof_handler(dim, level, s)
    n = 2**level
    assert dof.n_dofs == (s * n + 1) ** dim
    # shared DoFs sit at the same physical location seen from every cell
    mesh = dof.mesh
    for cell in range(mesh.n_cells):
        phys = mesh.cell_origin(cell) + dof.element.reference_nodes * mesh.h
        np.testing.assert_allclose(dof.support_points[dof.local_dof_indices(cell)], phys, atol=1e-14)


def test_sparsity_examples():
    p = build_spatial_sparsity(dof_handler(2, 0, 1))
    assert p.nnz == 16
    p = build_spatial_sparsity(dof_handler(1, 1, 1))
    assert p.pairs() == {(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)}


def test_sparsity_center_row_2x2_mesh():
    dof = dof_handler(2, 1, 1)
    center = int(np.flatnonzero(np.all(np.isclose(dof.support_points, 0.5), axis=1))[0])
    # oracle: union of DoFs over cells that contain the centre vertex
    touching = set()
    for cell in range(dof.mesh.n_cells):
        if center in dof.local_dof_indices(cell):
            touching.update(dof.local_dof_indices(cell).tolist())
    p = build_spatial_sparsity(dof)
    assert set(p.row(center).tolist()) == touching
    assert len(touching) == 9


def test_sparsity_symmetric():
    p = build_spatial_sparsity(dof_handler(2, 2, 2))
    pairs = p.pairs()
    assert all((j, i) in pairs for i, j in pairs)


def test_boundary_dofs_examples():
    assert len(boundary_dofs(dof_handler(2, 0, 1))) == 4
    dof = dof_handler(2, 2, 1)
    lattice = list(itertools.product(range(5), range(5)))
    perimeter = sum(1 for i, j in lattice if i in (0, 4) or j in (0, 4))
    assert len(boundary_dofs(dof)) == perimeter == 16
    dof = dof_handler(2, 0, 2)
    assert len(boundary_dofs(dof)) == 8
    assert 4 not in boundary_dofs(dof)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_interpolation_reproduces_polynomials(s):
    dof = dof_handler(2, 1, s)
    rng = np.random.default_rng(s)
    coef = rng.normal(size=(s + 1, s + 1))

    def poly(p):
        # total degree <= s
        return sum(coef[i, j] * p[..., 0] ** i * p[..., 1] ** j for i in range(s + 1) for j in range(s + 1) if i + j <= s)

    u = dof.interpolate(poly)
    e = dof.element
    for cell in range(dof.mesh.n_cells):
        ref = rng.random((50, 2))
        phys = dof.mesh.cell_origin(cell) + ref * dof.mesh.h
        np.testing.assert_allclose(e.values(ref) @ u[dof.local_dof_indices(cell)], poly(phys), atol=1e-11)


@pytest.mark.parametrize("dim,s", [(1, 1), (2, 1), (2, 2), (2, 3)])
def test_stiffness_annihilates_constants_and_mass_sums_to_measure(dim, s):
    asm = SpatialAssembler(dof_handler(dim, 2, s))
    K = asm.stiffness_matrix()
    M = asm.mass_matrix()
    ones = np.ones(K.shape[0])
    np.testing.assert_allclose(K @ ones, 0.0, atol=1e-12)
    assert ones @ (M @ ones) == pytest.approx(1.0, abs=1e-12)


def test_q1_1d_matrices_match_closed_form():
    asm = SpatialAssembler(dof_handler(1, 0, 1))
    np.testing.assert_allclose(asm.mass_matrix().toarray(), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    np.testing.assert_allclose(asm.stiffness_matrix().toarray(), [[1, -1], [-1, 1]], atol=1e-14)
