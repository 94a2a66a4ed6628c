"""Command-line entry points wrapping the experiment harness.

Exit codes: 0 on success, 2 when a time step fails, 3 on configuration or
usage errors. Figures are rendered by default next to the CSV output; pass
--no-figures for CSV/JSON only. The BOLTZ_THREADS environment variable
caps the collision solver's FFT worker count.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Sequence

import click

from . import harness
from .errors import (
    ConfigError,
    InvalidArgumentError,
    SingularTableauError,
    StepFailureError,
)


@click.group(name="boltz-sldg")
def cli() -> None:
    """Semi-Lagrangian DG kinetic solver and experiment driver."""


def _override_options(command):
    options = [
        click.option(
            "--config", "config_path", type=click.Path(path_type=Path), default=None,
            help="INI configuration file; flags below override its values.",
        ),
        click.option(
            "--scheme", default=None,
            help="Time integrator: FBEuler, DP2A242, or ARS443.",
        ),
        click.option("--nx", "n_cells", type=int, default=None, help="Spatial cell count."),
        click.option("--k", "degree", type=int, default=None, help="Polynomial degree."),
        click.option("--cfl", type=float, default=None, help="Cells crossed per step at the grid's top speed."),
        click.option("--epsilon", type=float, default=None, help="Constant Knudsen number."),
        click.option("--t-final", type=float, default=None, help="Final time."),
        click.option(
            "--limiter/--no-limiter", "limiter", default=None,
            help="Toggle the maximum-principle limiter.",
        ),
        click.option("--output-dir", default=None, help="Directory for CSV/JSON/PNG output."),
        click.option(
            "--figures/--no-figures", "figures", default=True, show_default=True,
            help="Render PNG figures beside the CSV output.",
        ),
    ]
    for opt in reversed(options):
        command = opt(command)
    return command


def _build_config(config_path: Path | None, test: str | None, **overrides) -> harness.RunConfig:
    if config_path is not None:
        cfg = harness.parse_config(config_path)
    else:
        cfg = harness.default_config(test or "none")
    cfg = harness.apply_overrides(cfg, test=test, **overrides)
    if cfg.output_dir is None:
        cfg = cfg.replace(output_dir="out")
    return cfg


def _fmt_err(value: float) -> str:
    return f"{value:.3e}" if math.isfinite(value) else "--"


def _fmt_order(value: float) -> str:
    return f"{value:.2f}" if math.isfinite(value) else "--"


def _echo_run(result: harness.RunResult) -> None:
    first, last = result.diagnostics[0], result.diagnostics[-1]
    drift = abs(last.mass - first.mass) / abs(first.mass)
    click.echo(
        f"{result.config.scheme}: {last.step} steps to t = {last.time:g} "
        f"({result.elapsed_seconds:.1f}s)"
    )
    click.echo(
        f"  mass drift {drift:.3e}, min f {result.min_f:.3e}, "
        f"equilibrium distance {last.ap_error:.3e}, L2 {last.l2_norm:.6g}"
    )
    if result.output_dir is not None:
        click.echo(f"  output in {result.output_dir}")


def _echo_convergence(table: harness.ConvergenceTable) -> None:
    click.echo(
        f"{table.scheme}, degree {table.degree}, cfl {table.cfl:g}, "
        f"epsilon {table.epsilon.label()}"
    )
    click.echo("  n_x      e1    order1       e2    order2")
    for row in table.rows:
        click.echo(
            f"  {row.n_cells:3d} {_fmt_err(row.e1):>9} {_fmt_order(row.order1):>6} "
            f"{_fmt_err(row.e2):>9} {_fmt_order(row.order2):>6}"
        )


def _echo_ap(result: harness.APDecayResult) -> None:
    click.echo("  scheme     epsilon  final distance      e_rho       e_u1        e_T")
    by_key = {(s.scheme, s.epsilon): s.ap_errors[-1] for s in result.series}
    for row in result.table:
        final = by_key[(row.scheme, row.epsilon)]
        click.echo(
            f"  {row.scheme:8s} {row.epsilon:9.0e} {final:15.3e} "
            f"{row.e_rho:10.3e} {row.e_u1:10.3e} {row.e_temperature:10.3e}"
        )


def _render(figures: bool, renderer, result, out_dir) -> None:
    if not figures:
        return
    from . import figures as figs

    paths = getattr(figs, renderer)(result, out_dir)
    for path in paths:
        click.echo(f"  figure {path}")


@cli.command("run")
@_override_options
@click.option(
    "--test", type=click.Choice(["accuracy", "ap", "sod", "mixing"]), default=None,
    help="Run a canned study instead of a single simulation.",
)
def run_cmd(config_path: Path | None, figures: bool, test: str | None, **overrides) -> None:
    """Run one simulation, or a canned study selected with --test.

    Without --config, a sensible default configuration for the selected
    test is used. The mixing study always sweeps all three schemes at
    cfl 0.5 and 2; the other studies follow the configured scheme.
    """
    cfg = _build_config(config_path, test, **overrides)
    out = Path(cfg.output_dir)
    if cfg.test == "none":
        result = harness.run_simulation(cfg)
        _echo_run(result)
        _render(figures, "render_run", result, out)
    elif cfg.test == "accuracy":
        table = harness.run_convergence(cfg)
        _echo_convergence(table)
        _render(figures, "render_convergence", table, out)
    elif cfg.test == "ap":
        result = harness.run_ap_decay(cfg, schemes=(cfg.scheme,))
        _echo_ap(result)
        _render(figures, "render_ap_decay", result, out)
    elif cfg.test == "sod":
        result = harness.run_sod(cfg)
        click.echo(
            f"{cfg.scheme} cfl {cfg.cfl:g} eps {cfg.epsilon.label()}: flag {result.flag}, "
            f"min f {_fmt_err(result.min_f)}, e2(rho) {_fmt_err(result.e2_rho)} "
            f"vs {result.reference.label}"
        )
        _render(figures, "render_sod", result, out)
    else:
        result = harness.run_mixing(cfg)
        click.echo("  scheme     cfl   flag    e1(rho)    e2(rho)")
        for row in result.rows:
            click.echo(
                f"  {row.scheme:8s} {row.cfl:5g} {row.flag:>6} "
                f"{_fmt_err(row.e1_rho):>10} {_fmt_err(row.e2_rho):>10}"
            )
        _render(figures, "render_mixing", result, out)


@cli.command("convergence")
@_override_options
@click.option(
    "--nx-list", default="4,8,16,32", show_default=True,
    help="Comma-separated doubling sequence of cell counts.",
)
def convergence_cmd(config_path: Path | None, figures: bool, nx_list: str, **overrides) -> None:
    """Grid self-convergence study for the configured scheme."""
    cfg = _build_config(config_path, "accuracy", **overrides)
    try:
        ns = [int(part) for part in nx_list.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--nx-list must be comma-separated integers: {exc}") from None
    table = harness.run_convergence(cfg, ns)
    _echo_convergence(table)
    _render(figures, "render_convergence", table, Path(cfg.output_dir))


@cli.command("ap-test")
@_override_options
@click.option(
    "--schemes", default="ARS443", show_default=True,
    help="Comma-separated scheme names to sweep.",
)
@click.option(
    "--epsilons", default="1e-2,1e-4,1e-6", show_default=True,
    help="Comma-separated Knudsen numbers to sweep.",
)
def ap_test_cmd(
    config_path: Path | None, figures: bool, schemes: str, epsilons: str, **overrides
) -> None:
    """Equilibrium-decay study on the two-beam relaxation data."""
    cfg = _build_config(config_path, "ap", **overrides)
    names = [part.strip() for part in schemes.split(",") if part.strip()]
    try:
        eps = [float(part) for part in epsilons.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--epsilons must be comma-separated numbers: {exc}") from None
    result = harness.run_ap_decay(cfg, schemes=names, epsilons=eps)
    _echo_ap(result)
    _render(figures, "render_ap_decay", result, Path(cfg.output_dir))


@cli.command("analyze-tableau")
@click.argument("source")
@click.option(
    "--json-out", type=click.Path(path_type=Path), default=None,
    help="Also write the JSON report to this file.",
)
def analyze_tableau_cmd(source: str, json_out: Path | None) -> None:
    """Classify SOURCE (builtin scheme name or JSON tableau file).

    Prints the human-readable report followed by the JSON document with
    the classification, order verdicts, relaxation weights, and the
    admissible stiffness bound z_max.
    """
    report = harness.analyze_tableau(source)
    click.echo(report.to_text())
    payload = json.dumps(report.to_json_dict(), indent=2)
    click.echo(payload)
    if json_out is not None:
        json_out.write_text(payload + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    """Console entry point with the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="boltz-sldg", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 3
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ConfigError, InvalidArgumentError, SingularTableauError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except StepFailureError as exc:
        where = [
            part
            for part, present in (
                (f"step {exc.step}", exc.step is not None),
                (f"stage {exc.stage}", exc.stage is not None),
                (f"t = {exc.time:.6g}" if exc.time is not None else "", exc.time is not None),
            )
            if present
        ]
        suffix = f" ({', '.join(where)})" if where else ""
        click.echo(f"step failure{suffix}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
