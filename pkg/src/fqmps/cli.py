"""Command-line surface: run, eos, validate, resume, info, report.

Exit codes: 0 ok, 2 config error, 3 numeric error, 4 validation failure.
``FQMPS_OUTPUT_ROOT`` prefixes every output directory; ``FQMPS_WORKERS``
sets the worker count for parameter scans.
"""

from __future__ import annotations

import json
import os
import sys
import traceback

import click

from .checkpoint import CheckpointError, checkpoint_info
from .scenarios import (
    ConfigError,
    load_config,
    parse_scenario,
    resume_tdvp,
    run_scenario,
    write_json,
)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4


def _output_root():
    return os.environ.get("FQMPS_OUTPUT_ROOT")


def _fail_numeric(scenario_dir, exc):
    payload = {
        "error": f"{type(exc).__name__}: {exc}",
        "traceback": traceback.format_exc(),
    }
    try:
        if scenario_dir:
            os.makedirs(scenario_dir, exist_ok=True)
            write_json(os.path.join(scenario_dir, "diagnostics.json"), payload)
    except OSError:
        pass
    click.echo(f"numeric failure: {exc}", err=True)
    sys.exit(EXIT_NUMERIC)


@click.group()
def main():
    """First-quantized MPS toolkit for the 1D t-V model."""


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.option("--plot/--no-plot", default=False,
              help="render figures after the run")
def run(config, plot):
    """Execute a dmrg or tdvp scenario described by CONFIG (JSON)."""
    try:
        scenario = parse_scenario(load_config(config), _output_root())
        if scenario.kind not in ("dmrg", "tdvp", "bench"):
            raise ConfigError(
                f"'run' handles dmrg/tdvp/bench scenarios, got {scenario.kind!r} "
                "(use the eos/validate subcommands)"
            )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        meta = run_scenario(scenario, progress=_echo_progress)
    except (ConfigError,) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as exc:
        _fail_numeric(scenario.output_dir, exc)
    click.echo(json.dumps(meta["resolved"]["model"]))
    click.echo(f"outputs in {scenario.output_dir}")
    if plot:
        from .report import render_run

        for path in render_run(scenario.output_dir):
            click.echo(f"figure {path}")


def _echo_progress(item):
    if hasattr(item, "sweep"):
        click.echo(
            f"sweep {item.sweep} [{item.direction}] E={item.energy:.12f} "
            f"D={item.max_bond} leak={item.leakage if item.leakage is not None else float('nan'):.2e} "
            f"({item.seconds:.1f}s)"
        )
    else:
        click.echo(str(item))


@main.command()
@click.argument("config", type=click.Path(exists=False))
@click.option("--plot/--no-plot", default=False)
def eos(config, plot):
    """Ground-state scan and Maxwell construction from CONFIG (JSON)."""
    try:
        scenario = parse_scenario(load_config(config), _output_root())
        if scenario.kind != "eos":
            raise ConfigError(f"'eos' expects kind=eos, got {scenario.kind!r}")
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        meta = run_scenario(scenario, progress=_echo_progress)
    except Exception as exc:
        _fail_numeric(scenario.output_dir, exc)
    gap = meta["results"].get("half_filling_gap")
    click.echo(f"half-filling charge gap: {gap}")
    click.echo(f"outputs in {scenario.output_dir}")
    if plot:
        from .report import render_run

        for path in render_run(scenario.output_dir):
            click.echo(f"figure {path}")


@main.command()
@click.option("--tier", type=click.Choice(["quick", "full"]), default="quick")
@click.option("--output", type=click.Path(), default=None,
              help="write the JSON report here")
def validate(tier, output):
    """Run the oracle cross-check suite."""
    from .validate import validate_suite

    report = validate_suite(tier)
    text = json.dumps(report, indent=2, default=str)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    click.echo(text)
    for check in report["checks"]:
        mark = "pass" if check["passed"] else "FAIL"
        click.echo(f"{mark:4s} {check['name']} ({check['seconds']}s)", err=True)
    if not report["passed"]:
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.argument("checkpoint", type=click.Path(exists=False))
@click.argument("config", type=click.Path(exists=False))
def resume(checkpoint, config):
    """Continue a TDVP run from CHECKPOINT using CONFIG's tdvp section."""
    try:
        scenario = parse_scenario(load_config(config), _output_root())
        if scenario.kind != "tdvp":
            raise ConfigError("resume expects a tdvp scenario config")
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        meta = resume_tdvp(checkpoint, scenario)
    except (CheckpointError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as exc:
        _fail_numeric(scenario.output_dir, exc)
    click.echo(f"resumed to t={meta['results']['resumed']['final_time']}")


@main.command()
@click.argument("checkpoint", type=click.Path(exists=False))
def info(checkpoint):
    """Describe a state checkpoint."""
    try:
        click.echo(json.dumps(checkpoint_info(checkpoint), indent=2))
    except (CheckpointError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@main.command()
@click.argument("run_dir", type=click.Path(exists=False))
def report(run_dir):
    """Render figures from a finished run directory."""
    from .report import render_run

    if not os.path.isdir(run_dir):
        click.echo(f"config error: {run_dir} is not a directory", err=True)
        sys.exit(EXIT_CONFIG)
    paths = render_run(run_dir)
    if not paths:
        click.echo("nothing to render", err=True)
    for path in paths:
        click.echo(path)


if __name__ == "__main__":
    main()
