"""Matplotlib renderings of harness results, written next to the CSV output.

Everything here consumes the result objects returned by the harness and
renders PNG files with the Agg backend, so the package works headless and
the core library never imports matplotlib (the CLI imports this module
lazily and only when figures are requested).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import (
    APDecayResult,
    ConvergenceTable,
    MixingResult,
    RunResult,
    SodResult,
)
from .mesh import node_coordinates

__all__ = [
    "render_ap_decay",
    "render_convergence",
    "render_mixing",
    "render_run",
    "render_sod",
]

_MACRO_PANELS = (
    ("rho", "density"),
    ("u1", "velocity u1"),
    ("T", "temperature"),
)


def _macro_columns(macro) -> dict[str, np.ndarray]:
    return {
        "rho": macro.rho.ravel(),
        "u1": macro.u[..., 0].ravel(),
        "T": macro.temperature.ravel(),
    }


def _profile_axes(axes, x, macro, label: str, style: str = "-") -> None:
    cols = _macro_columns(macro)
    for ax, (key, title) in zip(axes, _MACRO_PANELS):
        ax.plot(np.ravel(x), cols[key], style, label=label, linewidth=1.2)
        ax.set_title(title)
        ax.set_xlabel("x")


def render_run(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Final macro profiles plus the diagnostic time series."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    field = result.field
    x = node_coordinates(field.mesh, field.basis)

    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), constrained_layout=True)
    _profile_axes(axes, x, result.final_macro, label=result.config.scheme)
    axes[0].legend(fontsize=8)
    path = out / "profiles.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    paths.append(path)

    rows = result.diagnostics
    t = np.array([r.time for r in rows])
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), constrained_layout=True)
    axes[0].semilogy(t, np.maximum([r.ap_error for r in rows], 1e-300))
    axes[0].set_title("distance to equilibrium")
    axes[0].set_xlabel("t")
    mass0 = rows[0].mass
    axes[1].plot(t, [abs(r.mass - mass0) / abs(mass0) for r in rows], label="mass")
    e0 = rows[0].energy
    axes[1].plot(t, [abs(r.energy - e0) / abs(e0) for r in rows], label="energy")
    axes[1].set_title("relative conservation drift")
    axes[1].set_xlabel("t")
    axes[1].legend(fontsize=8)
    axes[2].plot(t, [r.l2_norm for r in rows], label="L2 norm")
    axes[2].plot(t, [r.min_f for r in rows], label="min f")
    axes[2].set_title("stability monitors")
    axes[2].set_xlabel("t")
    axes[2].legend(fontsize=8)
    path = out / "diagnostics.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    paths.append(path)
    return paths


def render_convergence(table: ConvergenceTable, out_dir: str | Path) -> list[Path]:
    """Log-log error decay with first/second/third order guide slopes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for r in table.rows if np.isfinite(r.e1)]
    if not rows:
        return []
    n = np.array([r.n_cells for r in rows], dtype=float)
    e1 = np.array([r.e1 for r in rows])
    e2 = np.array([r.e2 for r in rows])
    fig, ax = plt.subplots(figsize=(4.6, 3.6), constrained_layout=True)
    ax.loglog(n, e1, "o-", label="e1 (rel. l1)")
    ax.loglog(n, e2, "s-", label="e2 (rel. l2)")
    for p in (1, 2, 3):
        guide = e2[0] * (n / n[0]) ** (-p)
        ax.loglog(n, guide, ":", color="gray", linewidth=0.8)
        ax.annotate(f"slope -{p}", (n[-1], guide[-1]), fontsize=7, color="gray")
    ax.set_xlabel("number of cells")
    ax.set_ylabel("self-convergence error")
    ax.set_title(f"{table.scheme}, degree {table.degree}, cfl {table.cfl:g}")
    ax.legend(fontsize=8)
    path = out / "convergence.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return [path]


def render_ap_decay(result: APDecayResult, out_dir: str | Path) -> list[Path]:
    """Equilibrium-distance decay per stiffness level on one semilog plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.8), constrained_layout=True)
    for s in result.series:
        ax.semilogy(
            s.times,
            np.maximum(s.ap_errors, 1e-300),
            label=f"{s.scheme}, eps = {s.epsilon:.0e}",
        )
        ax.axhline(s.epsilon, color="gray", linestyle=":", linewidth=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("weighted l1 distance to equilibrium")
    ax.legend(fontsize=8)
    path = out / "ap_decay.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return [path]


def render_sod(result: SodResult, out_dir: str | Path) -> list[Path]:
    """Shock profiles against the fine reference; skipped for unstable runs."""
    if result.run is None:
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    field = result.run.field
    x = node_coordinates(field.mesh, field.basis)
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), constrained_layout=True)
    _profile_axes(
        axes, result.reference.node_positions(), result.reference.macro,
        label=f"reference ({result.reference.label})", style="k--",
    )
    _profile_axes(axes, x, result.run.final_macro, label=result.run.config.scheme)
    axes[0].legend(fontsize=8)
    path = out / "sod_profiles.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return [path]


def render_mixing(result: MixingResult, out_dir: str | Path) -> list[Path]:
    """One profile figure per cfl, overlaying all schemes and the reference."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    cfls = sorted({row.cfl for row in result.rows})
    for cfl in cfls:
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), constrained_layout=True)
        _profile_axes(
            axes, result.reference.node_positions(), result.reference.macro,
            label=f"reference ({result.reference.label})", style="k--",
        )
        for row in result.rows:
            if row.cfl != cfl:
                continue
            res = result.runs[(row.scheme, row.cfl)]
            if res is None:
                continue
            x = node_coordinates(res.field.mesh, res.field.basis)
            _profile_axes(axes, x, res.final_macro, label=row.scheme)
        axes[0].legend(fontsize=8)
        path = out / f"mixing_cfl{cfl:g}.png"
        fig.savefig(path, dpi=140)
        plt.close(fig)
        paths.append(path)
    return paths
