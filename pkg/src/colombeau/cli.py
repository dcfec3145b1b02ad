"""Command-line entry point: ``colombeau run SCENARIO``.

Exit codes: 0 when every task ran (a Refuted verdict is a result, not a
failure), 1 when any task errored, 2 for scenario or usage errors.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .runner import emit, run_scenario, text_summary
from .scenario import ScenarioError, bundled_names, bundled_path, load_scenario

OUT_ENV = "COLOMBEAU_OUT"
FORMATS = ("json", "csv", "text")


def _resolve(scenario: str) -> Path:
    p = Path(scenario)
    if p.exists():
        return p
    if scenario in bundled_names():
        return bundled_path(scenario)
    raise click.BadParameter(f"no file {scenario!r} and no bundled scenario of that name "
                             f"(bundled: {', '.join(bundled_names())})", param_hint="SCENARIO")


def _exponents(ctx, param, value):
    if value is None:
        return None
    try:
        a, b = (int(v) for v in value.split(":"))
    except ValueError:
        raise click.BadParameter("expected START:END, e.g. 4:36") from None
    return a, b


def _formats(ctx, param, value):
    fmts = [f.strip() for f in value.split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if bad:
        raise click.BadParameter(f"unknown format(s) {bad}; choose from {', '.join(FORMATS)}")
    return fmts


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Sampled verdicts in Colombeau algebras."""


@main.command()
@click.argument("scenario")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Output directory (default: ${OUT_ENV} or ./colombeau-out/NAME).")
@click.option("--format", "formats", default="json,csv,text", callback=_formats, show_default=True,
              help="Comma-separated list of json, csv, text.")
@click.option("--parallel/--sequential", default=False, help="Run independent tasks in threads.")
@click.option("--workers", type=int, default=None, help="Thread count for --parallel.")
@click.option("--grid-exponents", callback=_exponents, default=None,
              help="Override the eps grid exponents as START:END.")
@click.option("--q-max", type=int, default=None, help="Override the battery q_max.")
@click.option("--quiet", is_flag=True, help="Do not print the text summary.")
def run(scenario, out_dir, formats, parallel, workers, grid_exponents, q_max, quiet):
    """Run a scenario file or a bundled scenario by name."""
    path = _resolve(scenario)
    try:
        sc = load_scenario(path)
        sc.override(q_max, grid_exponents)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out = Path(out_dir or os.environ.get(OUT_ENV) or Path("colombeau-out") / sc.name)
    report = run_scenario(sc, parallel=parallel, workers=workers)
    try:
        written = emit(report, out, formats)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if not quiet:
        click.echo(text_summary(report), nl=False)
        for p in written:
            click.echo(f"wrote {p}")
    sys.exit(1 if report.failed else 0)


@main.command("list")
def list_cmd():
    """List bundled scenarios."""
    for name in bundled_names():
        click.echo(name)


if __name__ == "__main__":
    main()
