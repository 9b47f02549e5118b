"""Build and store the averaged-drift cache"""

import click
import numpy as np

from ..core.harness import prepare_drift
from ..ui.console import display_panel, print_success
from ..ui.formatting import Text
from .common import GlobalOptions, handle_errors, pass_options, tracked


@click.command()
@pass_options
@handle_errors
def average(options: GlobalOptions):
    """Tabulate b̄₁ on the averaging node grid"""
    config = options.load()
    model = config.build_model()
    with tracked("Building drift cache..."):
        cache = prepare_drift(config, model)

    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = cache.to_csv(out_dir / "drift_cache.csv")

    summary = Text()
    summary.append_field("Model", model.name)
    summary.append_field("Source", cache.source)
    summary.append_field("Nodes", str(cache.values.shape[0]), note=cache.order)
    summary.append_field("Max SE", f"{float(np.max(cache.se)):.3e}")
    if model.oracle is not None and cache.source == "estimate":
        exact = model.oracle(cache.node_points())
        gap = float(np.max(np.abs(exact - cache.values.reshape(exact.shape))))
        summary.append_field("Max |b̄₁ − oracle|", f"{gap:.3e}")
    display_panel("Drift Cache", summary)
    print_success(f"Cache written to {path}")
