"""Desk-scale invariant suite"""

import click

from .common import GlobalOptions, handle_errors, pass_options
from .run_command import execute


@click.command()
@pass_options
@handle_errors
def selftest(options: GlobalOptions):
    """Check reproducibility, normalization and oracle agreement"""
    execute(options, "invariant-suite")
