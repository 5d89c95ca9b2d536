"""Command line entry point ``burg``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 failed
verification.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import replace

import click

from . import __version__
from .config import ScaleRange, load_config
from .errors import BlowUpError, ConfigError, FitError, StepSizeError
from .experiment import EnsembleFailure, resolve_threads, run_experiment
from .statistics import fit_power_law
from .verify import verify_suite

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


def _threads(value):
    try:
        return resolve_threads(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--threads")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Stochastic Burgers simulations with Levy forcing."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the noise seed.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--threads", type=int, default=None, help="Worker processes (BURG_THREADS wins).")
def simulate(config, seed, out_dir, threads):
    """Run the experiment described by CONFIG."""
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    if seed is not None:
        if seed < 0:
            click.echo("error: --seed must be nonnegative", err=True)
            sys.exit(EXIT_INVALID)
        cfg = replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    try:
        report = run_experiment(cfg, threads=_threads(threads))
    except (EnsembleFailure, BlowUpError, StepSizeError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    for p in report.all_points():
        fits = ", ".join(f"{k} {v.fit.slope:.4f}" for k, v in p.fits.items())
        click.echo(f"{p.label}: N = {p.max_mode}, {p.survivors} trajectories; {fits}")
    for name, fb in report.sweep_fits.items():
        click.echo(f"sweep {name}: slope {fb.fit.slope:.4f}")
    for c in report.checks:
        click.echo(f"{c.status.upper():4s}  {c.name}: {c.value}")
    for w in report.warnings:
        click.echo(f"warning: {w}")
    click.echo(f"results in {cfg.out_dir}")


@cli.command()
@click.option("--full", is_flag=True, help="Also run the scaling-law experiments.")
@click.option("--ensemble-size", type=int, default=None, help="Ensemble size for --full.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=int, default=None)
def verify(full, ensemble_size, out_dir, threads):
    """Run the self-verification suite."""
    report = verify_suite(
        "full" if full else "quick", ensemble_size=ensemble_size, out_dir=out_dir, threads=_threads(threads)
    )
    for line in report.lines():
        click.echo(line)
    click.echo(f"{'passed' if report.passed else 'FAILED'} in {report.wall:.1f} s")
    sys.exit(EXIT_OK if report.passed else EXIT_VERIFY)


@cli.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--range", "fit_range", required=True, help="Fit range lo:hi in x.")
@click.option("--x", "x_col", default=None, help="x column (default: first).")
@click.option("--y", "y_col", default=None, help="y column (default: last).")
def fit(csv_path, fit_range, x_col, y_col):
    """Fit a power law y = C x**slope to two columns of a CSV file."""
    try:
        rng = ScaleRange.parse(fit_range)
        if rng.lo_nu or rng.hi_nu:
            raise ValueError("fit range endpoints must be plain numbers")
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError("no data rows")
        cols = list(rows[0].keys())
        xc, yc = x_col or cols[0], y_col or cols[-1]
        for c in (xc, yc):
            if c not in cols:
                raise ValueError(f"no column {c!r}; have {cols}")
        pts = [(float(r[xc]), float(r[yc])) for r in rows]
        result = fit_power_law(pts, (rng.lo, rng.hi))
    except (ValueError, FitError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    click.echo(json.dumps(result.as_dict(), indent=2))


@cli.command()
def version():
    """Print the package version."""
    click.echo(__version__)


def main(argv=None):
    try:
        return cli.main(args=argv, prog_name="burg", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(EXIT_INVALID)
    except click.ClickException as exc:
        # usage errors are invalid input, not numerical failures
        exc.show()
        sys.exit(EXIT_INVALID)


if __name__ == "__main__":  # pragma: no cover
    main()
