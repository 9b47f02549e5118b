"""Command-line interface for homogenization and filtering experiments"""

from pathlib import Path

import click

from . import __version__
from .commands import average, filter, run, selftest, simulate
from .commands.common import GlobalOptions
from .ui.console import console, display_panel


class CliGroup(click.Group):
    """Command group with custom help formatting"""

    def format_help(self, ctx, formatter):
        """Format help message with styling"""
        help_content = [
            "[bold blue]Simulation:[/bold blue]",
            f"  [cyan]simulate[/cyan]    [dim]Simulate Xᵉ, Zᵉ and X⁰ on shared noise[/dim] ([cyan]-e[/cyan]: ε, [cyan]-r[/cyan]: replication)",
            f"  [cyan]average[/cyan]     [dim]Build the averaged-drift cache[/dim]",
            "",
            "[bold blue]Filtering:[/bold blue]",
            f"  [cyan]filter[/cyan]      [dim]Run a particle filter on a simulated observation[/dim] ([cyan]-m[/cyan]: mode, [cyan]--fd[/cyan]: FD oracle)",
            "",
            "[bold blue]Experiments:[/bold blue]",
            f"  [cyan]run[/cyan]         [dim]Run an experiment kind and write its report[/dim]",
            f"  [cyan]selftest[/cyan]    [dim]Run the invariant suite[/dim]",
            "",
            "[bold blue]Global Options:[/bold blue]",
            f"  [cyan]--config[/cyan]    [dim]Experiment TOML file[/dim] ([cyan]-c[/cyan])",
            f"  [cyan]--seed[/cyan]      [dim]Master seed (unsigned 64-bit)[/dim]",
            f"  [cyan]--out[/cyan]       [dim]Output directory[/dim] ([cyan]-o[/cyan])",
            f"  [cyan]--threads[/cyan]   [dim]Worker threads, 0 = one per CPU[/dim] ([cyan]-j[/cyan])",
            f"  [cyan]--version[/cyan]   [dim]Show version number[/dim] ([cyan]alias: -V, -v[/cyan])",
        ]

        display_panel(
            title=f"HomFilter ({__version__}) - slow-fast homogenization and filtering",
            content="\n".join(help_content),
        )


@click.group(cls=CliGroup)
@click.option(
    "--version",
    "-v",
    "-V",
    is_flag=True,
    help="Show version number",
    is_eager=True,
    expose_value=False,
    callback=lambda ctx, param, value: value
    and (console.print(f"homfilter {__version__}") or ctx.exit()),
)
@click.option(
    "-c",
    "--config",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment TOML file",
)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Master seed")
@click.option(
    "-o", "--out", type=click.Path(file_okay=False, path_type=Path)
)
@click.option("-j", "--threads", type=click.IntRange(min=0))
@click.pass_context
def cli(ctx, config, seed, out, threads):
    """HomFilter - slow-fast homogenization and nonlinear filtering"""
    ctx.obj = GlobalOptions(config=config, seed=seed, out=out, threads=threads)


cli.add_command(simulate)
cli.add_command(average)
cli.add_command(filter)
cli.add_command(run)
cli.add_command(selftest)


if __name__ == "__main__":
    cli()
