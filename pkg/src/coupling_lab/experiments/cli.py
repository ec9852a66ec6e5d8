"""coupling-lab command line."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from ..sde_sim import ConfigError, configure_threads
from .config import ConfigValidationError, load_config
from .output import plot_csv
from .presets import list_presets, preset
from .runner import run_experiment


@click.group()
@click.version_option(package_name="artifact", prog_name="coupling-lab")
def main():
    """Simulate couplings of sub-Riemannian Brownian motions and check their laws.

    COUPLING_LAB_THREADS sets the worker thread count (results do not depend on it).
    """


def _threads() -> int:
    try:
        return configure_threads()
    except ConfigError as exc:
        raise click.UsageError(str(exc))


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Override the output directory of the config.")
@click.option("--no-plot", is_flag=True, help="Skip the SVG plot.")
def run(config, out_dir, no_plot):
    """Run the experiment described by a YAML CONFIG (or preset:<name>)."""
    _threads()
    try:
        if config.startswith("preset:"):
            spec = preset(config.split(":", 1)[1])
        else:
            spec = load_config(config)
    except (ConfigValidationError, KeyError) as exc:
        click.echo(f"config error:\n{exc}", err=True)
        sys.exit(2)
    m = run_experiment(spec, Path(out_dir) if out_dir else None, plot=not no_plot)
    where = Path(out_dir or spec.output.dir)
    click.echo(f"{spec.name}: wrote {where / m['outputs']['csv']['path']} "
               f"({m['n_rows']} rows, {m['wall_time_s']:.1f}s)")
    for a in m["assertions"]:
        click.echo(f"  [{'PASS' if a['passed'] else 'FAIL'}] {a['name']}: "
                   f"{a['measured']} (tol {a['tolerance']})")
    sys.exit(0 if m["passed"] else 1)


@main.command()
@click.option("--suite", type=click.Choice(["fast", "full"]), default="fast", show_default=True)
@click.option("--only", default=None, help="Comma-separated criterion numbers, e.g. 1,4,12.")
def verify(suite, only):
    """Run the acceptance criteria and print a verdict table."""
    from .acceptance import run_suite
    n = _threads()
    sel = None
    if only:
        try:
            sel = {int(x) for x in only.split(",")}
        except ValueError:
            raise click.UsageError("--only takes comma-separated integers")
    click.echo(f"acceptance suite '{suite}' on {n} thread(s)")
    results = run_suite(suite, sel, echo=lambda c: click.echo(f"{c.line()}  [{c.seconds:.1f}s]"))
    failed = [c.number for c in results if not c.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    sys.exit(1 if failed else 0)


@main.command()
def presets():
    """List the built-in presets and the statement each one checks."""
    for name, anchor in list_presets().items():
        click.echo(f"{name:22s} {anchor}")


@main.command()
@click.argument("csv_path", metavar="CSV", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False), help="SVG file to write.")
@click.option("--logy", is_flag=True, help="Logarithmic y axis.")
def plot(csv_path, out, logy):
    """Plot the numeric columns of a result CSV against its first column."""
    try:
        cols = plot_csv(csv_path, out, logy=logy)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {out} ({', '.join(cols) or 'no series'})")


if __name__ == "__main__":
    main()
