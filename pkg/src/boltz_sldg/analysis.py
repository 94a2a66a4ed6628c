"""Executable checks of the tableau-level theory.

Three checkers: the coefficient recursions that bound the order of the
moment (limiting) scheme, the first-order relaxation condition expressed
through the elimination coefficients, and the positivity constraints on
the first three stages with their largest admissible stiffness ratio
z = beta*dt/eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidArgumentError, SingularTableauError
from .imex import ButcherPair, classify, shu_osher_coeffs

__all__ = [
    "OrderReport",
    "FirstOrderReport",
    "PositivityReport",
    "limiting_order_coeffs",
    "first_order_gh",
    "positivity_zmax",
]

_ZERO = 1e-14
_EQ_TOL = 1e-12
_Z_CAP = 1e12
_BISECT_ITERS = 60
_PRESCAN = 1024


@dataclass(frozen=True)
class OrderReport:
    """Per-stage coefficient table and the verified order of the moment scheme.

    ``verdict`` is the largest n in {0, 1, 2, 3} whose conditions all hold
    at the final stage (cumulatively) within 1e-12. The first-order
    condition is checked on the implicit abscissa; both final abscissae
    are reported since they coincide for the built-in pairs.
    """

    c_k: NDArray[np.float64]
    d_k: NDArray[np.float64]
    b_k: NDArray[np.float64]
    g_k: NDArray[np.float64]
    h_k: NDArray[np.float64]
    b_star_k: NDArray[np.float64]
    b_double_star_k: NDArray[np.float64]
    b_triple_star_k: NDArray[np.float64]
    c_s: float
    c_tilde_s: float
    verdict: int


@dataclass(frozen=True)
class FirstOrderReport:
    """Relaxation coefficients g, h per stage; verdict g_s = h_s = 1."""

    g: NDArray[np.float64]
    h: NDArray[np.float64]
    verdict: bool


@dataclass(frozen=True)
class PositivityReport:
    """Stage positivity conditions and the admissible stiffness range.

    ``z_max`` is the supremum of z > 0 keeping every condition satisfied
    (+inf when unconstrained up to the 1e12 cap). Conditions that do not
    depend on z appear in ``static_checks``; the z-dependent ones report
    their margin at ``z_max`` (or at the cap). ``partial_coverage`` marks
    tableaux with more than three stages, where only the first three
    stages are constrained.
    """

    z_max: float
    partial_coverage: bool
    static_checks: tuple[tuple[str, bool], ...]
    margins_at_zmax: tuple[tuple[str, float], ...]
    violated: str | None


def _elimination_weights(a_imp: NDArray[np.float64], s: int) -> NDArray[np.float64]:
    """Lower-triangular weights relating stage increments to stage values.

    Columns with a zero diagonal are skipped; if such a column carries a
    nonzero sub-diagonal entry the recursion would need to divide by the
    zero and the tableau is rejected.
    """
    for j in range(s):
        if abs(a_imp[j, j]) <= _ZERO and np.any(
            np.abs(a_imp[j + 1 :, j]) > _ZERO
        ):
            raise SingularTableauError(
                f"order recursion divides by zero implicit diagonal "
                f"in column {j + 1}"
            )
    btil = np.zeros((s, s))
    for k in range(s):
        for j in range(k):
            if abs(a_imp[j, j]) <= _ZERO:
                continue
            acc = a_imp[k, j] / a_imp[j, j]
            for l in range(j + 1, k):
                if abs(a_imp[l, l]) > _ZERO:
                    acc -= a_imp[k, l] * btil[l, j] / a_imp[l, l]
            btil[k, j] = acc
    return btil


def limiting_order_coeffs(t: ButcherPair) -> OrderReport:
    """Coefficient recursions bounding the order of the moment scheme."""
    a_imp = t.a_implicit
    ct = t.c_tilde
    s = t.s
    btil = _elimination_weights(a_imp, s)
    d = np.zeros(s)
    b = np.zeros(s)
    g = np.zeros(s)
    h = np.zeros(s)
    bs = np.zeros(s)
    bss = np.zeros(s)
    bsss = np.zeros(s)
    for k in range(s):
        row = btil[k, :k]
        rest = 1.0 - row.sum()
        dc = ct[k] - ct[:k]
        d[k] = row @ (d[:k] + dc * ct[:k])
        b[k] = rest * ct[k] ** 2 + row @ (b[:k] + dc**2)
        g[k] = row @ (g[:k] + 0.5 * dc**2 * ct[:k])
        h[k] = row @ (h[:k] + dc * d[:k])
        bs[k] = row @ (bs[:k] + dc * b[:k])
        bss[k] = row @ (bss[:k] + dc**2 * ct[:k])
        bsss[k] = rest * ct[k] ** 3 + row @ (bsss[:k] + dc**3)
    first = abs(ct[-1] - 1.0) <= _EQ_TOL
    second = first and abs(d[-1] - 0.5) <= _EQ_TOL and abs(b[-1]) <= _EQ_TOL
    third = (
        second
        and abs(g[-1] - 1.0 / 6.0) <= _EQ_TOL
        and abs(h[-1] - 1.0 / 6.0) <= _EQ_TOL
        and abs(bs[-1]) <= _EQ_TOL
        and abs(bss[-1]) <= _EQ_TOL
        and abs(bsss[-1]) <= _EQ_TOL
    )
    verdict = 3 if third else 2 if second else 1 if first else 0
    return OrderReport(
        c_k=ct.copy(),
        d_k=d,
        b_k=b,
        g_k=g,
        h_k=h,
        b_star_k=bs,
        b_double_star_k=bss,
        b_triple_star_k=bsss,
        c_s=float(t.c[-1]),
        c_tilde_s=float(ct[-1]),
        verdict=verdict,
    )


def _require_ck_gsa_ars(t: ButcherPair, op: str) -> None:
    cls = classify(t)
    if not (cls.is_type_ck and cls.is_gsa and cls.is_ars):
        raise InvalidArgumentError(
            f"{op} applies to CK, globally stiffly accurate, ARS tableaux"
        )


def first_order_gh(t: ButcherPair) -> FirstOrderReport:
    """First-order relaxation coefficients from the elimination rows.

    Recursion: g_i accumulates the history-weighted g values plus the
    stage's implicit diagonal; h_i accumulates history g/h weights, the
    remainder row sums, and the first-stage remainder scalar. Both start
    at zero and first order needs both to reach one at the final stage.
    """
    _require_ck_gsa_ars(t, "first_order_gh")
    coeffs = shu_osher_coeffs(t)
    s = t.s
    g = np.zeros(s)
    h = np.zeros(s)
    for i in range(2, s + 1):
        brow = coeffs.b_rows[i - 1]
        drow = coeffs.d_rows[i - 1]
        hist = slice(1, i - 1)  # stages 2..i-1, zero-based 1..i-2
        g[i - 1] = brow @ g[hist] + t.a_implicit[i - 1, i - 1]
        h[i - 1] = brow @ h[hist] + drow.sum() + coeffs.d_scalars[i - 1]
    verdict = bool(abs(g[-1] - 1.0) <= _EQ_TOL and abs(h[-1] - 1.0) <= _EQ_TOL)
    return FirstOrderReport(g=g, h=h, verdict=verdict)


def positivity_zmax(t: ButcherPair) -> PositivityReport:
    """Admissible stiffness range for nonnegative stage values.

    The sufficient conditions constrain the first three stages only; the
    z-independent ones are checked once, and the supremum over the
    z-dependent ones is bracketed on 1024 log-spaced points in (0, 1e12]
    and then bisected to 1e-9.
    """
    _require_ck_gsa_ars(t, "positivity_zmax")
    s = t.s
    if s < 2:
        raise InvalidArgumentError("positivity analysis needs at least 2 stages")
    a_exp = t.a_explicit
    a_imp = t.a_implicit
    a1 = a_exp[1, 0]
    ath11 = a_imp[1, 1]
    static = [
        ("a1 >= 0", bool(a1 >= 0.0)),
        ("ath11 > 0", bool(ath11 > 0.0)),
    ]
    margins: list[tuple[str, object]] = []
    if s >= 3:
        a2 = a_exp[2, 0]
        ah21 = a_exp[2, 1]
        ath21 = a_imp[2, 1]
        ath22 = a_imp[2, 2]
        static.append(("ah21 >= 0", bool(ah21 >= 0.0)))
        static.append(("ath22 > 0", bool(ath22 > 0.0)))
        margins = [
            (
                "1 - z*ath21/(1+z*ath11) >= 0",
                lambda z: 1.0 - z * ath21 / (1.0 + z * ath11),
            ),
            (
                "a2 - z*ath21*a1/(1+z*ath11) >= 0",
                lambda z: a2 - z * ath21 * a1 / (1.0 + z * ath11),
            ),
            (
                "ath21 - ah21 - z*ath21*ath11/(1+z*ath11) >= 0",
                lambda z: (ath21 - ah21) - z * ath21 * ath11 / (1.0 + z * ath11),
            ),
        ]

    for name, ok in static:
        if not ok:
            return PositivityReport(
                z_max=0.0,
                partial_coverage=s > 3,
                static_checks=tuple(static),
                margins_at_zmax=tuple((n, float(f(0.0))) for n, f in margins),
                violated=name,
            )

    def all_ok(z: float) -> bool:
        return all(f(z) >= 0.0 for _, f in margins)

    zs = np.logspace(-9, np.log10(_Z_CAP), _PRESCAN)
    if not margins or (all_ok(_Z_CAP) and all(all_ok(z) for z in zs)):
        return PositivityReport(
            z_max=np.inf,
            partial_coverage=s > 3,
            static_checks=tuple(static),
            margins_at_zmax=tuple((n, float(f(_Z_CAP))) for n, f in margins),
            violated=None,
        )

    lo = 0.0
    hi = None
    for z in zs:
        if all_ok(z):
            lo = z
        else:
            hi = z
            break
    if hi is None:
        hi = _Z_CAP
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if all_ok(mid):
            lo = mid
        else:
            hi = mid
    z_max = lo
    worst = min(margins, key=lambda item: item[1](hi))
    return PositivityReport(
        z_max=float(z_max),
        partial_coverage=s > 3,
        static_checks=tuple(static),
        margins_at_zmax=tuple((n, float(f(z_max))) for n, f in margins),
        violated=worst[0] if z_max == 0.0 else None,
    )
