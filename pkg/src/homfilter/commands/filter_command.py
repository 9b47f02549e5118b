"""Filter one simulated observation path"""

from typing import Optional

import click

from ..core.filter_metrics import FilterSetup, observe, run_filter
from ..core.harness import prepare_drift
from ..core.models import LEVY_FAMILY
from ..core.particle import EPSILON_MODE, FILTER_MODES, HOMOGENIZED_MODE
from ..core.seeding import replication_seed
from ..core.zakai import run_fd_filter
from ..ui.console import display_panel, print_success
from ..ui.formatting import Text
from .common import GlobalOptions, handle_errors, pass_options, tracked


@click.command()
@click.option(
    "-m",
    "--mode",
    type=click.Choice(FILTER_MODES),
    default=HOMOGENIZED_MODE,
    show_default=True,
)
@click.option(
    "-e", "--epsilon", type=float, help="Scale ε (default: first of the sweep)"
)
@click.option("-r", "--replication", type=int, default=0, show_default=True)
@click.option("-n", "--particles", type=int, help="Override filter.particles")
@click.option("--fd", is_flag=True, help="Also run the FD oracle (Lévy models)")
@pass_options
@handle_errors
def filter(
    options: GlobalOptions,
    mode: str,
    epsilon: Optional[float],
    replication: int,
    particles: Optional[int],
    fd: bool,
):
    """Run a particle filter and write its trace to CSV"""
    config = options.load()
    model = config.build_model()
    epsilon = config.sweep.epsilons[0] if epsilon is None else epsilon
    drift = prepare_drift(config, model)
    z = config.zakai
    # with --fd both filters start from N(x0, initial_std²)
    initial_std = (z.initial_std or None) if fd else None
    setup = FilterSetup(
        model=model,
        obs_model=config.build_observation(model),
        grid=config.time_grid(),
        particles=particles or config.filter.particles,
        drift=drift,
        function=config.filter.function,
        resample=config.filter.resample,
        initial_std=initial_std,
    )
    seed = replication_seed(config.monte_carlo.seed, replication)

    with tracked("Filtering..."):
        obs_path = observe(setup, epsilon, seed)
        trace = run_filter(
            setup,
            obs_path,
            seed,
            mode,
            epsilon if mode == EPSILON_MODE else None,
        )

    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = trace.to_csv(out_dir / f"filter_{mode}.csv")

    summary = Text()
    summary.append_field("Model", model.name)
    summary.append_field("Mode", mode, note=f"ε={epsilon:g}")
    summary.append_field("Particles", str(setup.particles))
    summary.append_field("Resamples", str(trace.resamples))
    summary.append_field(
        f"π̂_T({setup.function})", f"{trace.final(setup.function):.6f}"
    )
    summary.append_field("ρ̂_T(1)", f"{trace.rho1[-1]:.6f}")

    if fd:
        if model.family != LEVY_FAMILY:
            raise click.UsageError("--fd needs a Lévy-noise model")
        fd_run = run_fd_filter(
            obs_path,
            model,
            setup.obs_model,
            drift,
            lo=z.lo,
            hi=z.hi,
            cells=z.cells,
            functions=(setup.function,),
            implicit=z.implicit,
            initial_std=initial_std,
            snapshot_times=z.snapshots,
            snapshot_dir=out_dir,
        )
        fd_run.trace.to_csv(out_dir / "filter_fd.csv")
        summary.append_field(
            f"FD π̂_T({setup.function})",
            f"{fd_run.trace.final(setup.function):.6f}",
        )

    display_panel("Filter", summary)
    print_success(f"Trace written to {path}")
