"""Command-line front end: ``toriclab list`` and ``toriclab run``."""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import _kernels, scenario
from .errors import ScenarioError, ToricLabError

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def write_table(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Toric test-curve and quantization laboratory."""


@main.command("list")
def list_cmd():
    """Print the bundled scenarios."""
    for entry in scenario.catalog():
        click.echo(f"{entry['name']:<32} {entry['kind']:<18} {entry['description']}")
        click.echo(f"{'':<32} anchor: {entry['anchor']}")


@main.command("run")
@click.argument("scenarios", nargs=-1, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="toriclab_out", show_default=True,
              envvar="TORICLAB_OUT", help="Directory for CSV tables and JSON summaries.")
@click.option("--threads", type=int, default=None, envvar="TORICLAB_THREADS", help="Worker threads for the kernels.")
@click.option("--seed", type=int, default=None, envvar="TORICLAB_SEED", help="Override the scenario seed.")
@click.option("--tolerance-scale", type=float, default=1.0, show_default=True, envvar="TORICLAB_TOLERANCE_SCALE",
              help="Multiply every tolerance and time budget.")
def run_cmd(scenarios, out_dir, threads, seed, tolerance_scale):
    """Run scenario files (or bundled scenario names, or 'all')."""
    if threads:
        _kernels.set_threads(threads)
    names = [e["name"] for e in scenario.catalog()] if scenarios == ("all",) else list(scenarios)
    try:
        loaded = [scenario.load(s) for s in names]
    except ScenarioError as err:
        click.echo(f"input error: {err}", err=True)
        sys.exit(EXIT_INPUT)

    out = Path(out_dir)
    status = EXIT_PASS
    for sc in loaded:
        try:
            result, elapsed = scenario.execute(sc, seed=seed, tolerance_scale=tolerance_scale)
        except ScenarioError as err:
            click.echo(f"{sc['name']}: input error: {err}", err=True)
            sys.exit(EXIT_INPUT)
        except ToricLabError as err:
            click.echo(f"{sc['name']}: input error: {type(err).__name__}: {err}", err=True)
            sys.exit(EXIT_INPUT)
        target = out / sc["name"]
        target.mkdir(parents=True, exist_ok=True)
        write_table(target / "table.csv", result.columns, result.rows)
        summary = {"name": sc["name"], "kind": sc["kind"], "passed": result.passed, "seconds": round(elapsed, 3),
                   "backend": _kernels.backend(), "assertions": [a.to_json() for a in result.assertions]}
        (target / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        click.echo(f"{'PASS' if result.passed else 'FAIL'} {sc['name']} ({elapsed:.2f}s)")
        for a in result.assertions:
            if not a.passed:
                click.echo(f"  {a.name}: measured {a.measured:.6g} vs {a.tolerance:.6g} {a.row}", err=True)
                status = EXIT_FAIL
    sys.exit(status)


if __name__ == "__main__":
    main()
