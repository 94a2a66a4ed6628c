"""Spatial mesh, nodal Gauss-Legendre basis, and upstream cell location.

The spatial discretization lives on a uniform 1D mesh of ``n_cells`` cells.
Each cell carries a nodal polynomial basis of degree ``k`` whose nodes are
the ``k + 1`` Gauss-Legendre points mapped to the unit interval, so nodal
values double as quadrature samples: cell averages and inner products are
plain weighted sums of nodal values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidArgumentError

__all__ = [
    "BoundaryKind",
    "NodalBasis",
    "SpatialMesh",
    "gauss_legendre_unit",
    "lagrange_eval",
    "lagrange_matrix",
    "locate_upstream",
    "node_coordinates",
]


class BoundaryKind(enum.Enum):
    PERIODIC = "periodic"
    NEUMANN = "neumann"


def gauss_legendre_unit(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on [0, 1].

    The rule is exact for polynomials of degree 2n - 1; weights sum to one.
    """
    if n < 1:
        raise InvalidArgumentError(f"quadrature order must be >= 1, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    return nodes, weights


@dataclass(frozen=True)
class NodalBasis:
    """Degree-k nodal basis at Gauss-Legendre points of [0, 1]."""

    degree: int
    nodes: NDArray[np.float64] = field(repr=False)
    weights: NDArray[np.float64] = field(repr=False)

    @classmethod
    def create(cls, degree: int) -> "NodalBasis":
        if degree < 0:
            raise InvalidArgumentError(f"polynomial degree must be >= 0, got {degree}")
        nodes, weights = gauss_legendre_unit(degree + 1)
        return cls(degree=degree, nodes=nodes, weights=weights)

    @property
    def n_nodes(self) -> int:
        return self.degree + 1


def lagrange_eval(
    basis: NodalBasis, p: int, s: float | NDArray[np.float64]
) -> float | NDArray[np.float64]:
    """Evaluate the p-th cardinal polynomial of ``basis`` at ``s``.

    Cardinal property: the value is 1 at node p and 0 at every other node.
    ``s`` may lie outside [0, 1]; the polynomial extends naturally.
    """
    if not 0 <= p <= basis.degree:
        raise InvalidArgumentError(
            f"cardinal index {p} outside 0..{basis.degree}"
        )
    s_arr = np.asarray(s, dtype=np.float64)
    nodes = basis.nodes
    out = np.ones_like(s_arr)
    for q in range(basis.n_nodes):
        if q == p:
            continue
        out = out * (s_arr - nodes[q]) / (nodes[p] - nodes[q])
    if np.isscalar(s):
        return float(out)
    return out


def lagrange_matrix(basis: NodalBasis, s: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluation matrix E with E[i, p] = cardinal_p(s[i]).

    A nodal vector f maps to point values via E @ f.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.empty((s_arr.size, basis.n_nodes))
    for p in range(basis.n_nodes):
        out[:, p] = lagrange_eval(basis, p, s_arr)
    return out


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform mesh of [x_left, x_right] with 1-based cell indexing."""

    x_left: float
    x_right: float
    n_cells: int
    boundary: BoundaryKind

    def __post_init__(self) -> None:
        if self.n_cells < 1:
            raise InvalidArgumentError(f"n_cells must be >= 1, got {self.n_cells}")
        if not self.x_right > self.x_left:
            raise InvalidArgumentError(
                f"empty domain: [{self.x_left}, {self.x_right}]"
            )

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    def cell_left(self, j: int) -> float:
        """Left edge of cell j (1-based)."""
        return self.x_left + (j - 1) * self.dx


def node_coordinates(mesh: SpatialMesh, basis: NodalBasis) -> NDArray[np.float64]:
    """Physical node positions, shape (n_cells, k + 1)."""
    lefts = mesh.x_left + mesh.dx * np.arange(mesh.n_cells)
    return lefts[:, None] + mesh.dx * basis.nodes[None, :]


def locate_upstream(
    mesh: SpatialMesh, j: int, v: float, tau: float
) -> tuple[int, float]:
    """Upstream cell index and fractional offset for cell j traced back by v*tau.

    The left edge of cell j traces back to x_{j-1/2} - v*tau, which sits at
    relative position alpha inside cell j*. Periodic meshes wrap j*; Neumann
    meshes saturate at the boundary cell with alpha = 0, so the shift reads
    only boundary-cell data there.
    """
    if not 1 <= j <= mesh.n_cells:
        raise InvalidArgumentError(f"cell index {j} outside 1..{mesh.n_cells}")
    if tau < 0:
        raise InvalidArgumentError(f"trace-back duration must be >= 0, got {tau}")
    d = -v * tau / mesh.dx
    shift = int(np.floor(d))
    alpha = d - shift
    # Float fuzz can give alpha == 1.0 when d is a hair below an integer.
    if alpha >= 1.0:
        shift += 1
        alpha = 0.0
    j_star = j + shift
    if mesh.boundary is BoundaryKind.PERIODIC:
        j_star = (j_star - 1) % mesh.n_cells + 1
    else:
        if j_star < 1:
            return 1, 0.0
        if j_star > mesh.n_cells:
            return mesh.n_cells, 0.0
    return j_star, float(alpha)
