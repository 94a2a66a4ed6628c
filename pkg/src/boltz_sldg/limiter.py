"""Local-maximum-principle-preserving rescaling of shifted DG polynomials.

A semi-Lagrangian shift projects the upstream polynomial onto each cell,
and near a discontinuity that projection can overshoot the range the field
attained on the cells it was traced back from. The limiter pulls every cell
polynomial toward its own quadrature average just far enough that sampled
values stay inside the old local bounds. Rescaling about the average keeps
the average itself, so per-velocity mass is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidArgumentError
from .mesh import NodalBasis, lagrange_matrix
from .transport import ShiftPlanSet
from .velocity import DistributionField

__all__ = ["LimiterConfig", "lmpp_apply"]

# Below this, a bound coincides with the cell average and that side imposes
# no constraint (ratio treated as +infinity).
_DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class LimiterConfig:
    """Switch plus the per-cell sampling density used to estimate extrema.

    ``sample_count`` uniform points are added to the quadrature nodes and
    cell endpoints when scanning a polynomial for its range; it must be at
    least degree + 3, enforced where the degree is known.
    """

    enabled: bool = True
    sample_count: int = 10

    def __post_init__(self) -> None:
        if self.sample_count < 4:
            raise InvalidArgumentError(
                f"sample_count must be at least 4, got {self.sample_count}"
            )


def _sample_matrix(basis: NodalBasis, sample_count: int) -> NDArray[np.float64]:
    pts = np.concatenate(
        [basis.nodes, (0.0, 1.0), np.linspace(0.0, 1.0, sample_count)]
    )
    return lagrange_matrix(basis, pts)


def lmpp_apply(
    f_shifted: DistributionField,
    f_before: DistributionField,
    plans: ShiftPlanSet,
    cfg: LimiterConfig,
) -> DistributionField:
    """Limit ``f_shifted`` against the local bounds of ``f_before``.

    ``plans`` must be the plan set that produced ``f_shifted``; its upstream
    indices determine which cells of ``f_before`` bound each output cell
    (one cell for a whole-cell shift, the two straddled cells otherwise).
    Cells whose new extrema already sit inside the old bounds are returned
    bit-identical.
    """
    basis = f_shifted.basis
    if cfg.sample_count < basis.degree + 3:
        raise InvalidArgumentError(
            f"sample_count {cfg.sample_count} < degree + 3 = {basis.degree + 3}"
        )
    if f_shifted.values.shape != f_before.values.shape:
        raise InvalidArgumentError("shifted and source fields differ in shape")
    if not cfg.enabled or plans.is_identity:
        return f_shifted.copy()

    vals = f_shifted.values
    n_vx = f_shifted.grid.n_points
    sample = _sample_matrix(basis, cfg.sample_count)

    p_bar = np.einsum("p,jpxy->jxy", basis.weights, vals)
    samp = np.einsum("sp,jpxy->jsxy", sample, vals)
    new_max = samp.max(axis=1)
    new_min = samp.min(axis=1)

    samp_old = np.einsum("sp,jpxy->jsxy", sample, f_before.values)
    src_max = samp_old.max(axis=1)
    src_min = samp_old.min(axis=1)
    old_max = np.empty_like(src_max)
    old_min = np.empty_like(src_min)
    for i in range(n_vx):
        hi = src_max[plans.idx_left[i], i, :]
        lo = src_min[plans.idx_left[i], i, :]
        if plans.alphas[i] > 0.0:
            hi = np.maximum(hi, src_max[plans.idx_right[i], i, :])
            lo = np.minimum(lo, src_min[plans.idx_right[i], i, :])
        old_max[:, i, :] = hi
        old_min[:, i, :] = lo

    den_hi = np.abs(new_max - p_bar)
    den_lo = np.abs(new_min - p_bar)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_hi = np.abs(old_max - p_bar) / den_hi
        r_lo = np.abs(old_min - p_bar) / den_lo
    r_hi = np.where(den_hi < _DENOM_FLOOR, np.inf, r_hi)
    r_lo = np.where(den_lo < _DENOM_FLOOR, np.inf, r_lo)
    theta = np.clip(np.minimum(r_hi, r_lo), 0.0, 1.0)

    center = p_bar[:, None]
    limited = center + theta[:, None] * (vals - center)
    out = np.where(theta[:, None] == 1.0, vals, limited)
    return f_shifted.like(out)
