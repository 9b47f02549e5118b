"""Run one experiment sweep"""

import click

from ..core.config import EXPERIMENT_KINDS
from ..core.harness import run_experiment
from ..ui.console import display_report, print_success, print_warning
from .common import GlobalOptions, handle_errors, pass_options, tracked


def execute(options: GlobalOptions, kind: str) -> None:
    config = options.load(kind)
    with tracked(f"Running {kind}..."):
        report = run_experiment(config)
    written = report.write(config.output_dir)
    display_report(report)
    print_success(f"Wrote {len(written)} files to {config.output_dir}")
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        print_warning(f"Failed checks: {', '.join(failed)}")
        raise click.exceptions.Exit(1)


@click.command()
@click.argument("kind", type=click.Choice(EXPERIMENT_KINDS))
@pass_options
@handle_errors
def run(options: GlobalOptions, kind: str):
    """Run an experiment and write its report"""
    execute(options, kind)
