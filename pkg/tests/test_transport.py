import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boltz_sldg.errors import InvalidArgumentError
from boltz_sldg.mesh import BoundaryKind, NodalBasis, SpatialMesh, node_coordinates
from boltz_sldg.transport import (
    ShiftCache,
    build_shift_matrices,
    build_shift_plan,
    shift_apply,
)
from boltz_sldg.velocity import DistributionField, VelocityGrid, total_conserved


def _poly_field(mesh, basis, grid, coef):
    """Nodal samples of a global polynomial, constant across velocity."""
    x = node_coordinates(mesh, basis)
    poly = np.polynomial.Polynomial(coef)
    values = np.broadcast_to(
        poly(x)[..., None, None], x.shape + (grid.n_points, grid.n_points)
    ).copy()
    return DistributionField(values, mesh, basis, grid), poly


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_zero_offset_matrices_are_identity_and_null(degree):
    basis = NodalBasis.create(degree)
    a, b = build_shift_matrices(basis, 0.0)
    np.testing.assert_allclose(a, np.eye(degree + 1), atol=1e-13)
    np.testing.assert_allclose(b, 0.0, atol=1e-13)


@given(
    alpha=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    degree=st.sampled_from([1, 2, 3]),
)
def test_shift_matrices_partition_constants(alpha, degree):
    """A constant state must pass through the two-piece projection intact."""
    basis = NodalBasis.create(degree)
    a, b = build_shift_matrices(basis, alpha)
    row_sums = a.sum(axis=1) + b.sum(axis=1)
    np.testing.assert_allclose(row_sums, 1.0, atol=1e-12)


@pytest.mark.parametrize("alpha", [-0.1, 1.0, 1.5])
def test_shift_matrices_reject_offset_outside_unit_interval(alpha):
    basis = NodalBasis.create(2)
    with pytest.raises(InvalidArgumentError):
        build_shift_matrices(basis, alpha)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_shift_is_exact_on_polynomials(degree, rng):
    """Shifting nodal samples of a degree-k polynomial reproduces the
    shifted polynomial exactly away from the walls."""
    basis = NodalBasis.create(degree)
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.NEUMANN)
    grid = VelocityGrid(7.0, 8)
    f, poly = _poly_field(mesh, basis, grid, rng.standard_normal(degree + 1))
    tau = 0.2 * mesh.dx / grid.half_width
    g = shift_apply(build_shift_plan(mesh, basis, grid, tau), f)
    x = node_coordinates(mesh, basis)
    feet = x[1:7][..., None] - grid.points[None, None, :] * tau
    exact = poly(feet)[..., None]
    scale = np.abs(f.values).max()
    np.testing.assert_allclose(g.values[1:7], np.broadcast_to(exact, g.values[1:7].shape), atol=1e-12 * scale)


def test_forward_then_backward_shift_restores_polynomials(rng):
    basis = NodalBasis.create(2)
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.NEUMANN)
    grid = VelocityGrid(7.0, 8)
    f, _ = _poly_field(mesh, basis, grid, rng.standard_normal(3))
    tau = 0.17 * mesh.dx / grid.half_width
    cache = ShiftCache(mesh, basis, grid)
    g = cache.shift(cache.shift(f, tau), -tau)
    scale = np.abs(f.values).max()
    np.testing.assert_allclose(
        g.values[2:6], f.values[2:6], atol=1e-12 * scale
    )


def test_zero_duration_plan_is_identity():
    basis = NodalBasis.create(2)
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    grid = VelocityGrid(7.0, 8)
    plans = build_shift_plan(mesh, basis, grid, 0.0)
    assert plans.is_identity
    f, _ = _poly_field(mesh, basis, grid, np.array([1.0, -2.0, 0.5]))
    g = shift_apply(plans, f)
    np.testing.assert_array_equal(g.values, f.values)


def test_plan_boundary_must_agree_with_mesh():
    basis = NodalBasis.create(2)
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    grid = VelocityGrid(7.0, 8)
    plans = build_shift_plan(
        mesh, basis, grid, 0.01, boundary=BoundaryKind.PERIODIC
    )
    assert plans.boundary is BoundaryKind.PERIODIC
    with pytest.raises(InvalidArgumentError):
        build_shift_plan(mesh, basis, grid, 0.01, boundary=BoundaryKind.NEUMANN)


def test_cache_reuses_plans_by_duration():
    basis = NodalBasis.create(2)
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    grid = VelocityGrid(7.0, 8)
    cache = ShiftCache(mesh, basis, grid)
    first = cache.get(0.003)
    assert cache.get(0.003) is first
    assert cache.get(-0.003) is not first


def test_repeated_shifts_conserve_mass(rng, gauss):
    mesh = SpatialMesh(0.0, 1.0, 8, BoundaryKind.PERIODIC)
    basis = NodalBasis.create(2)
    grid = VelocityGrid(7.0, 8)
    x = node_coordinates(mesh, basis)
    values = (1.0 + 0.5 * np.sin(2 * np.pi * x))[..., None, None] * gauss(
        grid, 1.0, 0.0, 0.0, 1.0
    )
    f = DistributionField(np.ascontiguousarray(values), mesh, basis, grid)
    cache = ShiftCache(mesh, basis, grid)
    mass0 = total_conserved(f)[0]
    for tau in rng.uniform(-0.5, 0.5, size=200) * mesh.dx / grid.half_width:
        f = cache.shift(f, float(tau))
    drift = abs(total_conserved(f)[0] - mass0) / abs(mass0)
    assert drift < 1e-12
