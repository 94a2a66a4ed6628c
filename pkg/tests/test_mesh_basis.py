import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boltz_sldg.errors import InvalidArgumentError
from boltz_sldg.mesh import (
    BoundaryKind,
    NodalBasis,
    SpatialMesh,
    gauss_legendre_unit,
    lagrange_eval,
    lagrange_matrix,
    locate_upstream,
    node_coordinates,
)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_quadrature_nodes_interior_and_weights_normalized(n):
    nodes, weights = gauss_legendre_unit(n)
    assert nodes.shape == weights.shape == (n,)
    assert np.all((nodes > 0.0) & (nodes < 1.0))
    assert np.all(np.diff(nodes) > 0.0)
    assert np.all(weights > 0.0)
    np.testing.assert_allclose(weights.sum(), 1.0, rtol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_quadrature_exact_through_degree_2n_minus_1(n):
    nodes, weights = gauss_legendre_unit(n)
    for m in range(2 * n):
        np.testing.assert_allclose(
            weights @ nodes**m, 1.0 / (m + 1), rtol=1e-13, err_msg=f"x^{m}"
        )


def test_quadrature_rejects_nonpositive_count():
    with pytest.raises(InvalidArgumentError):
        gauss_legendre_unit(0)


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_basis_has_one_node_per_coefficient(degree):
    basis = NodalBasis.create(degree)
    assert basis.degree == degree
    assert basis.n_nodes == degree + 1


def test_basis_rejects_negative_degree():
    with pytest.raises(InvalidArgumentError):
        NodalBasis.create(-1)


def test_lagrange_cardinal_property():
    basis = NodalBasis.create(3)
    for p in range(basis.n_nodes):
        vals = np.array([lagrange_eval(basis, p, s) for s in basis.nodes])
        expect = np.zeros(basis.n_nodes)
        expect[p] = 1.0
        np.testing.assert_allclose(vals, expect, atol=1e-13)


@given(s=st.floats(min_value=-0.5, max_value=1.5))
def test_lagrange_partition_of_unity(s):
    basis = NodalBasis.create(2)
    total = sum(lagrange_eval(basis, p, s) for p in range(basis.n_nodes))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_lagrange_rejects_out_of_range_index():
    basis = NodalBasis.create(2)
    with pytest.raises(InvalidArgumentError):
        lagrange_eval(basis, 3, 0.5)


def test_lagrange_matrix_rows_sum_to_one(rng):
    basis = NodalBasis.create(2)
    s = rng.uniform(0.0, 1.0, size=11)
    mat = lagrange_matrix(basis, s)
    assert mat.shape == (11, basis.n_nodes)
    np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-13)


def test_mesh_geometry():
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    assert mesh.dx == pytest.approx(0.125)
    assert mesh.cell_left(1) == 0.0
    assert mesh.cell_left(3) == pytest.approx(0.25)
    assert mesh.cell_left(8) == pytest.approx(0.875)


def test_mesh_rejects_bad_extents():
    with pytest.raises(InvalidArgumentError):
        SpatialMesh(1.0, 0.0, 8, BoundaryKind.PERIODIC)
    with pytest.raises(InvalidArgumentError):
        SpatialMesh(0.0, 1.0, 0, BoundaryKind.PERIODIC)


def test_node_coordinates_ordered_within_cells():
    mesh = SpatialMesh(0.0, 1.0, 4, BoundaryKind.PERIODIC)
    basis = NodalBasis.create(2)
    x = node_coordinates(mesh, basis)
    assert x.shape == (4, 3)
    flat = x.ravel()
    assert np.all(np.diff(flat) > 0.0)
    np.testing.assert_allclose(x[2], 0.5 + basis.nodes * mesh.dx, rtol=1e-14)


def test_locate_upstream_rejects_negative_duration():
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    with pytest.raises(InvalidArgumentError):
        locate_upstream(mesh, 1, 1.0, -0.1)


@given(
    j=st.integers(min_value=1, max_value=8),
    v=st.floats(min_value=-7.0, max_value=7.0),
    tau=st.floats(min_value=0.0, max_value=0.4),
)
def test_locate_upstream_periodic_reconstructs_foot(j, v, tau):
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    j_star, alpha = locate_upstream(mesh, j, v, tau)
    assert 1 <= j_star <= mesh.n_cells
    assert 0.0 <= alpha < 1.0
    foot = mesh.cell_left(j_star) + alpha * mesh.dx
    expect = (mesh.cell_left(j) - v * tau) % 1.0
    # both sides may land on the same point written as 0 or 1
    diff = abs(foot - expect)
    assert min(diff, 1.0 - diff) < 1e-10


def test_locate_upstream_neumann_saturates_at_walls():
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.NEUMANN)
    assert locate_upstream(mesh, 1, 5.0, 1.0) == (1, 0.0)
    assert locate_upstream(mesh, 8, -5.0, 1.0) == (8, 0.0)
    # interior feet are untouched by the wall rule
    j_star, alpha = locate_upstream(mesh, 5, 1.0, 0.05)
    foot = mesh.cell_left(j_star) + alpha * mesh.dx
    assert foot == pytest.approx(mesh.cell_left(5) - 0.05, abs=1e-12)
