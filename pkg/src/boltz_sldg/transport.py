"""Semi-Lagrangian shift operator for constant-speed 1D transport.

Each velocity value v moves nodal data by v*tau. The uniform mesh makes the
trace-back identical for every cell: the shifted cell reads two upstream
cells j* and j*+1 through the matrices A(alpha) and B(alpha), which encode
the L2 projection of the exactly transported polynomial onto the cell basis.
Matrix rows of A + B sum to one (constants shift to constants) and weighted
column sums reproduce the quadrature weights (mass is conserved exactly on
periodic meshes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidArgumentError
from .mesh import BoundaryKind, NodalBasis, SpatialMesh, lagrange_matrix
from .velocity import DistributionField, VelocityGrid

__all__ = [
    "ShiftPlan",
    "ShiftPlanSet",
    "ShiftCache",
    "build_shift_matrices",
    "build_shift_plan",
    "shift_apply",
]


def build_shift_matrices(
    basis: NodalBasis, alpha: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Recombination matrices A(alpha), B(alpha) for a fractional shift.

    A weighs the cell containing the traced-back left edge, B its right
    neighbor. The basis's own quadrature is exact here: every integrand is
    a product of two degree-k polynomials.
    """
    if not 0.0 <= alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1), got {alpha}")
    u = basis.nodes
    w = basis.weights
    # A: target nodes sample at u_q(1-alpha), sources at alpha + u_q(1-alpha).
    src_a = lagrange_matrix(basis, alpha + u * (1.0 - alpha))
    dst_a = lagrange_matrix(basis, u * (1.0 - alpha))
    a_mat = (1.0 - alpha) * (dst_a.T * w[None, :]) @ src_a / w[:, None]
    src_b = lagrange_matrix(basis, alpha * u)
    dst_b = lagrange_matrix(basis, alpha * (u - 1.0) + 1.0)
    b_mat = alpha * (dst_b.T * w[None, :]) @ src_b / w[:, None]
    return a_mat, b_mat


@dataclass(frozen=True)
class ShiftPlan:
    """Shift data for one velocity value."""

    velocity: float
    j_star_offset: int
    alpha: float
    A: NDArray[np.float64]
    B: NDArray[np.float64]
    boundary: BoundaryKind


@dataclass(frozen=True)
class ShiftPlanSet:
    """Per-velocity shift plans for one (mesh, basis, grid, tau) combination.

    Stacked arrays drive the bulk apply; ``plan(i)`` exposes the record for
    velocity index i.
    """

    mesh: SpatialMesh
    basis: NodalBasis
    grid: VelocityGrid
    tau: float
    offsets: NDArray[np.int64] = field(repr=False)
    alphas: NDArray[np.float64] = field(repr=False)
    a_mats: NDArray[np.float64] = field(repr=False)
    b_mats: NDArray[np.float64] = field(repr=False)
    # Gather indices (n_velocities, n_cells) for the two upstream cells.
    idx_left: NDArray[np.int64] = field(repr=False)
    idx_right: NDArray[np.int64] = field(repr=False)

    @property
    def boundary(self) -> BoundaryKind:
        return self.mesh.boundary

    def plan(self, i: int) -> ShiftPlan:
        return ShiftPlan(
            velocity=float(self.grid.points[i]),
            j_star_offset=int(self.offsets[i]),
            alpha=float(self.alphas[i]),
            A=self.a_mats[i],
            B=self.b_mats[i],
            boundary=self.boundary,
        )

    @property
    def is_identity(self) -> bool:
        return bool(
            np.all(self.offsets == 0) and np.all(self.alphas == 0.0)
        )


def _fractional_offsets(
    velocities: NDArray[np.float64], tau: float, dx: float
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    d = -velocities * tau / dx
    offsets = np.floor(d).astype(np.int64)
    alphas = d - offsets
    # Guard against alpha rounding up to 1.0 when d sits just below an integer.
    bump = alphas >= 1.0
    offsets[bump] += 1
    alphas[bump] = 0.0
    return offsets, alphas


def build_shift_plan(
    mesh: SpatialMesh,
    basis: NodalBasis,
    grid: VelocityGrid,
    tau: float,
    boundary: BoundaryKind | None = None,
) -> ShiftPlanSet:
    """Plans for shifting every velocity row by its displacement v*tau.

    Negative tau is legal; the tracing arithmetic handles both directions.
    Plans depend on the mesh only through dx and n_cells, so they are
    reusable across cells and across steps of equal duration.
    """
    if boundary is not None and boundary is not mesh.boundary:
        raise InvalidArgumentError(
            "requested boundary kind disagrees with the mesh's"
        )
    offsets, alphas = _fractional_offsets(grid.points, tau, mesh.dx)
    n_nodes = basis.n_nodes
    nv = grid.n_points
    a_mats = np.empty((nv, n_nodes, n_nodes))
    b_mats = np.empty((nv, n_nodes, n_nodes))
    # Distinct velocities often share alpha (mirrored pairs); build each
    # distinct alpha once.
    seen: dict[float, tuple[NDArray[np.float64], NDArray[np.float64]]] = {}
    for i, alpha in enumerate(alphas):
        key = float(alpha)
        if key not in seen:
            seen[key] = build_shift_matrices(basis, key)
        a_mats[i], b_mats[i] = seen[key]
    cells = np.arange(mesh.n_cells, dtype=np.int64)
    left = cells[None, :] + offsets[:, None]
    right = left + 1
    if mesh.boundary is BoundaryKind.PERIODIC:
        idx_left = left % mesh.n_cells
        idx_right = right % mesh.n_cells
    else:
        idx_left = np.clip(left, 0, mesh.n_cells - 1)
        idx_right = np.clip(right, 0, mesh.n_cells - 1)
    return ShiftPlanSet(
        mesh=mesh,
        basis=basis,
        grid=grid,
        tau=float(tau),
        offsets=offsets,
        alphas=alphas,
        a_mats=a_mats,
        b_mats=b_mats,
        idx_left=idx_left,
        idx_right=idx_right,
    )


def shift_apply(plans: ShiftPlanSet, f: DistributionField) -> DistributionField:
    """Apply the per-velocity semi-Lagrangian shift to every cell."""
    if f.mesh != plans.mesh or f.basis.degree != plans.basis.degree:
        raise InvalidArgumentError("shift plans were built for a different layout")
    if f.grid.n_points != plans.grid.n_points:
        raise InvalidArgumentError("shift plans were built for a different grid")
    if plans.is_identity:
        return f.copy()
    vals = f.values
    out = np.empty_like(vals)
    for i in range(plans.grid.n_points):
        src_l = vals[plans.idx_left[i], :, i, :]
        if plans.alphas[i] == 0.0:
            out[:, :, i, :] = src_l
            continue
        src_r = vals[plans.idx_right[i], :, i, :]
        out[:, :, i, :] = np.matmul(plans.a_mats[i], src_l) + np.matmul(
            plans.b_mats[i], src_r
        )
    return f.like(out)


class ShiftCache:
    """Lazily built shift plans keyed by exact duration.

    IMEX stages reuse a handful of durations (c-differences times dt) every
    step; building each plan once amortizes the matrix construction.
    """

    def __init__(
        self, mesh: SpatialMesh, basis: NodalBasis, grid: VelocityGrid
    ) -> None:
        self.mesh = mesh
        self.basis = basis
        self.grid = grid
        self._plans: dict[float, ShiftPlanSet] = {}

    def get(self, tau: float) -> ShiftPlanSet:
        key = float(tau)
        plan = self._plans.get(key)
        if plan is None:
            plan = build_shift_plan(self.mesh, self.basis, self.grid, key)
            self._plans[key] = plan
        return plan

    def shift(self, f: DistributionField, tau: float) -> DistributionField:
        return shift_apply(self.get(tau), f)
