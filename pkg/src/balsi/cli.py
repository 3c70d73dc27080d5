"""Command-line entry point: ``balsi-sim run | verify | preset | oracle``."""

from __future__ import annotations

import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import scenario as scn
from .errors import BalsiError, DomainError, ParseError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CHECKS = 0, 2, 3, 4


def _load(spec):
    """A scenario from a file path, or from a preset name when no such file exists."""
    if os.path.exists(spec):
        return scn.load(spec)
    if spec in scn.preset_names():
        return scn.preset(spec)
    raise ValidationError(f"no scenario file or preset named {spec!r}")


def _exit_code(exc):
    if isinstance(exc, (ParseError, ValidationError, DomainError)):
        return EXIT_VALIDATION
    return EXIT_NUMERICAL


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(_exit_code(exc))


def _run_one(spec, out, checks):
    from .runner import run_balsi, write_run
    sc = _load(spec)
    result = run_balsi(sc, checks=checks)
    out_dir = write_run(result, os.path.join(out, sc.name))
    return out_dir, [c.line() for c in result.checks]


@click.group()
@click.version_option(package_name="balsi-sim")
def main():
    """Event-triggered adaptive control with batch least-squares identification."""


@main.command()
@click.argument("scenarios", nargs=-1, required=True)
@click.option("--out", "out", default="runs", show_default=True,
              type=click.Path(file_okay=False), help="Parent directory for run folders.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1),
              help="Independent scenarios to run in parallel.")
@click.option("--checks/--no-checks", default=True, show_default=True,
              help="Evaluate the guarantee checks after each run.")
def run(scenarios, out, jobs, checks):
    """Run scenario files (or preset names) and write one folder per run."""
    try:
        for spec in scenarios:
            _load(spec)
    except BalsiError as exc:
        _fail(exc)
    try:
        if jobs == 1 or len(scenarios) == 1:
            outcomes = [_run_one(spec, out, checks) for spec in scenarios]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_run_one, scenarios, [out] * len(scenarios),
                                         [checks] * len(scenarios)))
    except BalsiError as exc:
        _fail(exc)
    for out_dir, lines in outcomes:
        click.echo(out_dir)
        for line in lines:
            click.echo("  " + line)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def verify(run_dir):
    """Re-run a saved scenario, re-check the guarantees and compare the CSV bytes."""
    from .runner import run_balsi, write_run
    from .verify import CheckResult
    try:
        sc = scn.load(os.path.join(run_dir, "scenario.toml"))
        sc.name = os.path.basename(os.path.normpath(run_dir))
        result = run_balsi(sc)
    except BalsiError as exc:
        _fail(exc)
    with tempfile.TemporaryDirectory() as tmp:
        fresh = write_run(result, os.path.join(tmp, "rerun"))
        same = []
        for name in ("trajectory.csv", "events.csv"):
            old = os.path.join(run_dir, name)
            if os.path.exists(old):
                with open(old, "rb") as a, open(os.path.join(fresh, name), "rb") as b:
                    same.append(a.read() == b.read())
    checks = list(result.checks)
    checks.append(CheckResult("reproducible", all(same), float(sum(same)), float(len(same)),
                              "saved files identical to a fresh run"))
    for c in checks:
        click.echo(c.line())
    sys.exit(EXIT_OK if all(c.passed for c in checks) else EXIT_CHECKS)


@main.command()
@click.argument("name", required=False)
@click.option("--list", "list_", is_flag=True, help="List available presets.")
def preset(name, list_):
    """Print a preset scenario file."""
    if list_ or name is None:
        for n in scn.preset_names():
            click.echo(n)
        return
    try:
        click.echo(scn.preset_text(name), nl=False)
    except BalsiError as exc:
        _fail(exc)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--tau", type=float, default=None, help="Upper limit (default: first event).")
@click.option("--grid", type=click.IntRange(16), default=256, show_default=True)
@click.option("--rtol", type=float, default=1e-4, show_default=True)
def oracle(run_dir, tau, grid, rtol):
    """Compare the integrated (Y, Q) with direct double-integral quadrature."""
    from .oracle import quadrature_oracle
    from .runner import run_scenario
    try:
        sc = scn.load(os.path.join(run_dir, "scenario.toml"))
        if not sc.controller.kind.startswith("balsi"):
            raise ValidationError("oracle needs a BaLSI run (balsi_exact or balsi_regularized)")
        result = run_scenario(sc)
        if tau is None:
            tau = result.events[0].tau if result.events else result.t_end
        Y, Q, origin = result.identifier_at(tau)
        Yr, Qr = quadrature_oracle(result.traj, result.plant.structure, result.law, tau, grid,
                                   result.noise, origin, rtol=rtol)
    except BalsiError as exc:
        _fail(exc)
    ey = np.linalg.norm(Y - Yr) / max(np.linalg.norm(Yr), 1e-300)
    eq = np.linalg.norm(Q - Qr) / max(np.linalg.norm(Qr), 1e-300)
    ok = ey <= rtol and eq <= rtol
    click.echo(f"tau={tau:.9g} grid={grid} rel_err_Y={ey:.3e} rel_err_Q={eq:.3e} "
               f"{'PASS' if ok else 'FAIL'}")
    sys.exit(EXIT_OK if ok else EXIT_CHECKS)


if __name__ == "__main__":
    main()
