"""IMEX Runge-Kutta stepping for the penalized semi-Lagrangian scheme.

The collision term is split as Q = Q_P + G_P around a BGK penalty
Q_P = beta (M[U] - f). Each step treats G_P explicitly along
characteristics and Q_P diagonally implicitly; because the penalty is
linear in f given (beta, M), every implicit stage has a closed-form
solution once the stage moments are predicted. The predictor and the
eliminated (Shu-Osher) form of the stage recursion both come from the
tableau, so the coefficient derivations live here next to the stepper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .collision import CollisionPlan, penalty_beta, q_spectral
from .errors import (
    DegenerateMomentsError,
    InvalidArgumentError,
    SingularTableauError,
    StepFailureError,
)
from .limiter import LimiterConfig, lmpp_apply
from .transport import ShiftCache, ShiftPlanSet, shift_apply
from .velocity import (
    DistributionField,
    MacroField,
    conserved_moments,
    maxwellian,
    moments,
)

__all__ = [
    "ButcherPair",
    "TableauClass",
    "ShuOsherCoeffs",
    "builtin_tableaux",
    "classify",
    "shu_osher_coeffs",
    "moments_update",
    "imex_step",
    "imex_step_shu_osher",
    "limiting_euler_step",
]

_TOL = 1e-14


def _as_matrix(a: object, s: int, name: str) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != (s, s):
        raise InvalidArgumentError(f"{name} must be {s}x{s}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _as_vector(a: object, s: int, name: str) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != (s,):
        raise InvalidArgumentError(f"{name} must have length {s}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ButcherPair:
    """Double Butcher tableau: explicit matrix paired with a DIRK matrix.

    Row sums are recomputed and checked against the supplied abscissae on
    construction; the explicit matrix must be strictly lower triangular and
    the implicit one lower triangular.
    """

    name: str
    a_explicit: NDArray[np.float64]
    a_implicit: NDArray[np.float64]
    b: NDArray[np.float64]
    b_tilde: NDArray[np.float64]
    c: NDArray[np.float64]
    c_tilde: NDArray[np.float64]

    def __post_init__(self) -> None:
        b = np.array(self.b, dtype=np.float64)
        s = b.shape[0] if b.ndim == 1 else 0
        if s < 1:
            raise InvalidArgumentError("b must be a nonempty vector")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "b_tilde", _as_vector(self.b_tilde, s, "b_tilde"))
        object.__setattr__(self, "c", _as_vector(self.c, s, "c"))
        object.__setattr__(self, "c_tilde", _as_vector(self.c_tilde, s, "c_tilde"))
        a_exp = _as_matrix(self.a_explicit, s, "a_explicit")
        a_imp = _as_matrix(self.a_implicit, s, "a_implicit")
        object.__setattr__(self, "a_explicit", a_exp)
        object.__setattr__(self, "a_implicit", a_imp)
        if np.any(np.abs(np.triu(a_exp)) > 0.0):
            raise InvalidArgumentError(
                "explicit matrix must be strictly lower triangular"
            )
        if np.any(np.abs(np.triu(a_imp, 1)) > 0.0):
            raise InvalidArgumentError("implicit matrix must be lower triangular")
        if np.max(np.abs(a_exp.sum(axis=1) - self.c)) > _TOL:
            raise InvalidArgumentError("c does not match explicit row sums")
        if np.max(np.abs(a_imp.sum(axis=1) - self.c_tilde)) > _TOL:
            raise InvalidArgumentError("c_tilde does not match implicit row sums")

    @property
    def s(self) -> int:
        return int(self.b.shape[0])

    @property
    def is_gsa(self) -> bool:
        """b vectors equal the last stage rows (solution = last stage)."""
        return bool(
            np.max(np.abs(self.a_explicit[-1] - self.b)) <= _TOL
            and np.max(np.abs(self.a_implicit[-1] - self.b_tilde)) <= _TOL
        )


@dataclass(frozen=True)
class TableauClass:
    """Structural flags of a double tableau.

    Type A: the implicit matrix itself is invertible. Type CK: its first
    row vanishes and the trailing (s-1)x(s-1) block is invertible. ARS is
    the CK special case with zero first implicit column and b_tilde[0] = 0.
    """

    is_type_a: bool
    is_type_ck: bool
    is_ars: bool
    is_gsa: bool


def _invertible(lower: NDArray[np.float64]) -> bool:
    if lower.size == 0:
        return True
    return bool(np.abs(np.prod(np.diag(lower))) > _TOL)


def classify(t: ButcherPair) -> TableauClass:
    """Type flags; triangular determinants compared against 1e-14."""
    a_imp = t.a_implicit
    type_a = _invertible(a_imp)
    first_row_zero = bool(np.max(np.abs(a_imp[0])) <= _TOL)
    type_ck = first_row_zero and _invertible(a_imp[1:, 1:])
    is_ars = (
        type_ck
        and bool(np.max(np.abs(a_imp[1:, 0]), initial=0.0) <= _TOL)
        and abs(float(t.b_tilde[0])) <= _TOL
    )
    return TableauClass(
        is_type_a=type_a,
        is_type_ck=type_ck,
        is_ars=is_ars,
        is_gsa=t.is_gsa,
    )


def builtin_tableaux(name: str) -> ButcherPair:
    """One of the three built-in pairs: FBEuler, DP2A242, or ARS443."""
    if name == "FBEuler":
        return ButcherPair(
            name=name,
            a_explicit=[[0.0, 0.0], [1.0, 0.0]],
            a_implicit=[[0.0, 0.0], [0.0, 1.0]],
            b=[1.0, 0.0],
            b_tilde=[0.0, 1.0],
            c=[0.0, 1.0],
            c_tilde=[0.0, 1.0],
        )
    if name == "DP2A242":
        return ButcherPair(
            name=name,
            a_explicit=[
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.5, 0.5, 0.0],
            ],
            a_implicit=[
                [2.0, 0.0, 0.0, 0.0],
                [-2.0, 2.0, 0.0, 0.0],
                [0.0, -1.0, 2.0, 0.0],
                [0.0, 0.5, -1.5, 2.0],
            ],
            b=[0.0, 0.5, 0.5, 0.0],
            b_tilde=[0.0, 0.5, -1.5, 2.0],
            c=[0.0, 0.0, 1.0, 1.0],
            c_tilde=[2.0, 0.0, 1.0, 1.0],
        )
    if name == "ARS443":
        return ButcherPair(
            name=name,
            a_explicit=[
                [0.0, 0.0, 0.0, 0.0, 0.0],
                [1.0 / 2.0, 0.0, 0.0, 0.0, 0.0],
                [11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0],
                [5.0 / 6.0, -5.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
                [1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0],
            ],
            a_implicit=[
                [0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0 / 2.0, 0.0, 0.0, 0.0],
                [0.0, 1.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
                [0.0, -1.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0, 0.0],
                [0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0],
            ],
            b=[1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0],
            b_tilde=[0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0],
            c=[0.0, 1.0 / 2.0, 2.0 / 3.0, 1.0 / 2.0, 1.0],
            c_tilde=[0.0, 1.0 / 2.0, 2.0 / 3.0, 1.0 / 2.0, 1.0],
        )
    raise InvalidArgumentError(f"unknown tableau name {name!r}")


@dataclass(frozen=True)
class ShuOsherCoeffs:
    """Per-stage elimination coefficients for the stage recursion.

    For CK tableaux ``b_rows[i-1]`` weights the stage history f(2)..f(i-1),
    ``d_rows`` the matching remainder history, and ``d_scalars`` the
    remainder of the first stage (equal to the step-start field). For type A,
    ``b_rows`` weights stages 1..i-1 (built from the full implicit matrix),
    ``d_rows`` is the identity-shift collapse of the recursive E-term, and
    ``d_scalars`` is zero. ``history_start`` names the first stage index a
    history row refers to.
    """

    kind: TableauClass
    b_rows: tuple[NDArray[np.float64], ...]
    d_rows: tuple[NDArray[np.float64], ...]
    d_scalars: NDArray[np.float64]
    implicit_diag: NDArray[np.float64]
    history_start: int


def _solve_row(
    block: NDArray[np.float64], row: NDArray[np.float64]
) -> NDArray[np.float64]:
    """row @ inv(block) for a lower-triangular block."""
    if row.size == 0:
        return row.copy()
    if not _invertible(block):
        raise SingularTableauError(
            "leading implicit sub-block is singular; cannot eliminate stages"
        )
    return np.linalg.solve(block.T, row)


def shu_osher_coeffs(t: ButcherPair) -> ShuOsherCoeffs:
    """Eliminate the penalty history from the stage recursion.

    Quantities with non-positive subscripts are zero, so the first rows
    are empty. CK elimination works on the trailing implicit block and
    requires matching abscissae (c = c_tilde); type A works on the full
    implicit matrix.
    """
    kind = classify(t)
    s = t.s
    a_exp = t.a_explicit
    a_imp = t.a_implicit
    b_rows: list[NDArray[np.float64]] = []
    d_rows: list[NDArray[np.float64]] = []
    d_scalars = np.zeros(s)
    if kind.is_type_ck:
        if np.max(np.abs(t.c - t.c_tilde)) > _TOL:
            raise InvalidArgumentError(
                "CK elimination requires matching abscissae (c = c_tilde)"
            )
        at_hat = a_imp[1:, 1:]
        a_hat = a_exp[1:, 1:]
        a_col = a_exp[1:, 0]
        for i in range(1, s + 1):
            m = max(i - 2, 0)
            row_b = _solve_row(at_hat[:m, :m], at_hat[i - 2, :m]) if m else np.zeros(0)
            row_d = a_hat[i - 2, :m] - row_b @ a_hat[:m, :m] if m else np.zeros(0)
            b_rows.append(row_b)
            d_rows.append(row_d)
            if i >= 2:
                d_scalars[i - 1] = a_col[i - 2] - row_b @ a_col[:m]
        history_start = 2
    elif kind.is_type_a:
        for i in range(1, s + 1):
            m = i - 1
            row_b = _solve_row(a_imp[:m, :m], a_imp[i - 1, :m]) if m else np.zeros(0)
            row_d = a_exp[i - 1, :m] - row_b @ a_exp[:m, :m] if m else np.zeros(0)
            b_rows.append(row_b)
            d_rows.append(row_d)
        history_start = 1
    else:
        raise InvalidArgumentError(
            "tableau is neither type A nor type CK; no elimination formula applies"
        )
    for row in b_rows + d_rows:
        row.setflags(write=False)
    d_scalars.setflags(write=False)
    diag = np.diag(a_imp).copy()
    diag.setflags(write=False)
    return ShuOsherCoeffs(
        kind=kind,
        b_rows=tuple(b_rows),
        d_rows=tuple(d_rows),
        d_scalars=d_scalars,
        implicit_diag=diag,
        history_start=history_start,
    )


def _validate_macro(macro: MacroField, stage: int, what: str) -> None:
    rho = macro.rho
    temp = macro.temperature
    bad = ~(np.isfinite(rho) & np.isfinite(temp) & (rho > 0.0) & (temp > 0.0))
    if np.any(bad):
        j, p = np.argwhere(bad)[0][:2]
        raise DegenerateMomentsError(
            f"{what} degenerate at stage {stage}, cell {int(j) + 1}, "
            f"node {int(p)}: needs rho > 0 and T > 0",
            cell=int(j) + 1,
            node=int(p),
            stage=stage,
        )


def moments_update(
    i: int,
    f_n: DistributionField,
    stage_history: list[DistributionField],
    coeffs: ShuOsherCoeffs,
    plans: list[ShiftPlanSet | None],
    *,
    shifted_base: DistributionField | None = None,
    limiter: LimiterConfig | None = None,
) -> MacroField:
    """Predict the moments of stage ``i`` before its implicit solve.

    ``plans[0]`` shifts the step-start field over the stage's own duration
    and ``plans[1:]`` align with ``stage_history`` (stages ``history_start``
    through i-1); a ``None`` plan means no shift. ``shifted_base`` lets the
    stepper reuse an already-shifted (and possibly limited) copy of f^n.

    When a ``limiter`` is given, each shifted history field is rescaled to
    its upstream bounds before its moments are taken. The prediction rows
    extrapolate (entries well outside [0, 1]), so near a discontinuity the
    history terms and the base must be bounded consistently or their
    mismatched overshoots get amplified into negative predicted density or
    temperature.
    """
    brow = coeffs.b_rows[i - 1]
    if len(stage_history) != brow.shape[0]:
        raise InvalidArgumentError(
            f"stage {i} expects {brow.shape[0]} history fields, "
            f"got {len(stage_history)}"
        )
    if len(plans) != len(stage_history) + 1:
        raise InvalidArgumentError("plans must align with [base] + history")
    limit = limiter is not None and limiter.enabled

    def shifted(field: DistributionField, plan: ShiftPlanSet | None):
        if plan is None:
            return field
        out = shift_apply(plan, field)
        if limit:
            out = lmpp_apply(out, field, plan, limiter)
        return out

    base = shifted_base if shifted_base is not None else shifted(f_n, plans[0])
    u = (1.0 - brow.sum()) * conserved_moments(base)
    for w, f_j, plan in zip(brow, stage_history, plans[1:]):
        if w != 0.0:
            u += w * conserved_moments(shifted(f_j, plan))
    macro = MacroField(u, f_n.mesh, f_n.basis)
    _validate_macro(macro, i, "predicted moments")
    return macro


def _epsilon_nodes(
    epsilon: float | NDArray[np.float64], n_cells: int, n_nodes: int
) -> NDArray[np.float64]:
    eps = np.asarray(epsilon, dtype=np.float64)
    if eps.ndim == 0:
        eps = np.full((n_cells, n_nodes), float(eps))
    elif eps.shape == (n_cells,):
        eps = np.broadcast_to(eps[:, None], (n_cells, n_nodes)).copy()
    elif eps.shape != (n_cells, n_nodes):
        raise InvalidArgumentError(
            f"epsilon must be scalar, per-cell, or per-node; got {eps.shape}"
        )
    if np.any(~np.isfinite(eps)) or np.any(eps <= 0.0):
        raise InvalidArgumentError("epsilon must be positive and finite")
    return eps


def _predictor_plans(
    i: int, coeffs: ShuOsherCoeffs, cache: ShiftCache, c_tilde: NDArray, dt: float
) -> list[ShiftPlanSet]:
    plans = [cache.get(c_tilde[i - 1] * dt)]
    for j in range(coeffs.history_start, i):
        plans.append(cache.get((c_tilde[i - 1] - c_tilde[j - 1]) * dt))
    return plans


def imex_step(
    tableau: ButcherPair,
    f_n: DistributionField,
    dt: float,
    epsilon: float | NDArray[np.float64],
    collision_plan: CollisionPlan,
    cache: ShiftCache,
    limiter: LimiterConfig | None = None,
) -> DistributionField:
    """One IMEX step; returns the last stage (tableau must be GSA).

    Stage loop: predict moments, build the penalty Maxwellian and rate,
    solve the diagonally-implicit stage in closed form, then recompute the
    moments from the actual stage value and store the collision splitting
    for later stages. Degenerate or non-finite stage values raise a step
    failure carrying the stage index. ``epsilon`` may vary per spatial
    node; it divides the collision terms before they are shifted.
    """
    if not tableau.is_gsa:
        raise InvalidArgumentError(
            "imex_step requires a globally stiffly accurate tableau"
        )
    coeffs = shu_osher_coeffs(tableau)
    s = tableau.s
    a_exp = tableau.a_explicit
    a_imp = tableau.a_implicit
    c = tableau.c
    ct = tableau.c_tilde
    n_cells, n_nodes = f_n.values.shape[:2]
    eps = _epsilon_nodes(epsilon, n_cells, n_nodes)
    inv_eps = (1.0 / eps)[:, :, None, None]
    limit = limiter is not None and limiter.enabled

    stages: list[DistributionField] = []
    pen_hist: list[NDArray[np.float64]] = []  # Q_P(f^(j)) / eps
    rem_hist: list[NDArray[np.float64]] = []  # G_P(f^(j)) / eps
    i = 0
    try:
        for i in range(1, s + 1):
            aii = a_imp[i - 1, i - 1]
            tau0 = ct[i - 1] * dt
            base = cache.shift(f_n, tau0)
            if limit:
                base = lmpp_apply(base, f_n, cache.get(tau0), limiter)
            rhs = base.values.copy()
            for j in range(1, i):
                w = a_exp[i - 1, j - 1]
                if w != 0.0:
                    rhs += (dt * w) * cache.shift(
                        f_n.like(rem_hist[j - 1]), (c[i - 1] - c[j - 1]) * dt
                    ).values
                w = a_imp[i - 1, j - 1]
                if w != 0.0:
                    rhs += (dt * w) * cache.shift(
                        f_n.like(pen_hist[j - 1]), (ct[i - 1] - ct[j - 1]) * dt
                    ).values
            if aii != 0.0:
                hist = stages[coeffs.history_start - 1 : i - 1]
                plans = _predictor_plans(i, coeffs, cache, ct, dt)
                u_pred = moments_update(
                    i, f_n, hist, coeffs, plans, shifted_base=base,
                    limiter=limiter if limit else None,
                )
                m_pred = maxwellian(u_pred, f_n.grid)
                z = (dt * aii) * penalty_beta(u_pred).beta[:, :, None, None] * inv_eps
                f_i = f_n.like((rhs + z * m_pred.values) / (1.0 + z))
            else:
                f_i = f_n.like(rhs)
            if not np.all(np.isfinite(f_i.values)):
                raise StepFailureError(
                    f"non-finite distribution values at stage {i}", stage=i
                )
            u_i = moments(f_i)
            _validate_macro(u_i, i, "stage moments")
            stages.append(f_i)
            if i < s:
                m_i = maxwellian(u_i, f_n.grid)
                p_vals = u_i.rho[:, :, None, None] * (m_i.values - f_i.values)
                q_vals = q_spectral(collision_plan, f_i.values)
                pen_hist.append(p_vals * inv_eps)
                rem_hist.append((q_vals - p_vals) * inv_eps)
    except DegenerateMomentsError as exc:
        raise StepFailureError(str(exc), stage=exc.stage or i) from exc
    return stages[-1]


def imex_step_shu_osher(
    tableau: ButcherPair,
    f_n: DistributionField,
    dt: float,
    epsilon: float | NDArray[np.float64],
    collision_plan: CollisionPlan,
    cache: ShiftCache,
) -> DistributionField:
    """One step in eliminated form; cross-validates ``shu_osher_coeffs``.

    The penalty history is removed in favor of the stage values themselves
    plus remainder terms. For CK tableaux the remainder weights are the
    per-stage d-rows and d-scalars; for type A the remainder enters through
    its own shift-and-accumulate recursion, kept as stored fields. In exact
    arithmetic with x-independent data this reproduces ``imex_step``.
    """
    if not tableau.is_gsa:
        raise InvalidArgumentError(
            "imex_step_shu_osher requires a globally stiffly accurate tableau"
        )
    coeffs = shu_osher_coeffs(tableau)
    s = tableau.s
    a_exp = tableau.a_explicit
    a_imp = tableau.a_implicit
    c = tableau.c
    ct = tableau.c_tilde
    n_cells, n_nodes = f_n.values.shape[:2]
    eps = _epsilon_nodes(epsilon, n_cells, n_nodes)
    inv_eps = (1.0 / eps)[:, :, None, None]
    ck = coeffs.kind.is_type_ck

    stages: list[DistributionField] = []
    rem_hist: list[NDArray[np.float64]] = []  # G_P(f^(j)) / eps
    e_hist: list[NDArray[np.float64]] = []  # type-A recursive remainder fields
    i = 0
    try:
        for i in range(1, s + 1):
            brow = coeffs.b_rows[i - 1]
            drow = coeffs.d_rows[i - 1]
            base = cache.shift(f_n, ct[i - 1] * dt)
            acc = (1.0 - brow.sum()) * base.values
            for idx, j in enumerate(range(coeffs.history_start, i)):
                if brow[idx] != 0.0:
                    acc += brow[idx] * cache.shift(
                        stages[j - 1], (ct[i - 1] - ct[j - 1]) * dt
                    ).values
            if ck:
                for idx, j in enumerate(range(2, i)):
                    if drow[idx] != 0.0:
                        acc += (dt * drow[idx]) * cache.shift(
                            f_n.like(rem_hist[j - 1]), (c[i - 1] - c[j - 1]) * dt
                        ).values
                d_i = coeffs.d_scalars[i - 1]
                if d_i != 0.0:
                    acc += (dt * d_i) * cache.shift(
                        f_n.like(rem_hist[0]), c[i - 1] * dt
                    ).values
            else:
                e_i = np.zeros_like(acc)
                for j in range(1, i):
                    w = a_exp[i - 1, j - 1]
                    if w != 0.0:
                        e_i += w * cache.shift(
                            f_n.like(rem_hist[j - 1]), (c[i - 1] - c[j - 1]) * dt
                        ).values
                    r = a_imp[i - 1, j - 1] / a_imp[j - 1, j - 1]
                    if r != 0.0:
                        e_i -= r * cache.shift(
                            f_n.like(e_hist[j - 1]), (ct[i - 1] - ct[j - 1]) * dt
                        ).values
                e_hist.append(e_i)
                acc += dt * e_i
            aii = coeffs.implicit_diag[i - 1]
            if aii != 0.0:
                hist = stages[coeffs.history_start - 1 : i - 1]
                plans = _predictor_plans(i, coeffs, cache, ct, dt)
                u_pred = moments_update(
                    i, f_n, hist, coeffs, plans, shifted_base=base
                )
                m_pred = maxwellian(u_pred, f_n.grid)
                z = (dt * aii) * penalty_beta(u_pred).beta[:, :, None, None] * inv_eps
                f_i = f_n.like((acc + z * m_pred.values) / (1.0 + z))
            else:
                f_i = f_n.like(acc)
            if not np.all(np.isfinite(f_i.values)):
                raise StepFailureError(
                    f"non-finite distribution values at stage {i}", stage=i
                )
            u_i = moments(f_i)
            _validate_macro(u_i, i, "stage moments")
            stages.append(f_i)
            if i < s:
                m_i = maxwellian(u_i, f_n.grid)
                p_vals = u_i.rho[:, :, None, None] * (m_i.values - f_i.values)
                q_vals = q_spectral(collision_plan, f_i.values)
                rem_hist.append((q_vals - p_vals) * inv_eps)
    except DegenerateMomentsError as exc:
        raise StepFailureError(str(exc), stage=exc.stage or i) from exc
    return stages[-1]


def limiting_euler_step(
    tableau: ButcherPair,
    u_n: MacroField,
    dt: float,
    cache: ShiftCache,
    limiter: LimiterConfig | None = None,
) -> MacroField:
    """Advance moments by the scheme's stiff limit.

    Each stage rebuilds the Maxwellian of its predicted moments, shifts it
    along characteristics, and projects back to moments, so only moment
    data survives between stages. Used as the reference solver when the
    relaxation is effectively instantaneous.
    """
    if not tableau.is_gsa:
        raise InvalidArgumentError(
            "limiting_euler_step requires a globally stiffly accurate tableau"
        )
    coeffs = shu_osher_coeffs(tableau)
    s = tableau.s
    ct = tableau.c_tilde
    grid = cache.grid
    limit = limiter is not None and limiter.enabled
    stage_moments: list[MacroField] = []
    i = 0
    try:
        m_n = maxwellian(u_n, grid)
        for i in range(1, s + 1):
            brow = coeffs.b_rows[i - 1]
            tau0 = ct[i - 1] * dt
            base = cache.shift(m_n, tau0)
            if limit:
                base = lmpp_apply(base, m_n, cache.get(tau0), limiter)
            u = (1.0 - brow.sum()) * conserved_moments(base)
            for idx, j in enumerate(range(coeffs.history_start, i)):
                if brow[idx] != 0.0:
                    m_j = maxwellian(stage_moments[j - 1], grid)
                    u += brow[idx] * conserved_moments(
                        cache.shift(m_j, (ct[i - 1] - ct[j - 1]) * dt)
                    )
            macro = MacroField(u, u_n.mesh, u_n.basis)
            _validate_macro(macro, i, "limiting stage moments")
            stage_moments.append(macro)
    except DegenerateMomentsError as exc:
        raise StepFailureError(str(exc), stage=exc.stage or i) from exc
    return stage_moments[-1]
