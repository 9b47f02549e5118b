"""Shared plumbing for commands: global options, config loading, errors"""

import functools
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from ..core.config import ExperimentConfig, load_config
from ..core.events import EventType, events
from ..core.exceptions import HomFilterError
from ..ui.console import print_error, progress_status


@dataclass
class GlobalOptions:
    """Values of the group-level flags"""

    config: Optional[Path] = None
    seed: Optional[int] = None
    out: Optional[Path] = None
    threads: Optional[int] = None

    def load(self, kind: Optional[str] = None) -> ExperimentConfig:
        """File config (or defaults) with command-line overrides applied"""
        base = (
            load_config(self.config)
            if self.config is not None
            else ExperimentConfig(kind=kind or "strong-convergence")
        )
        return base.with_overrides(
            seed=self.seed, out=self.out, threads=self.threads, kind=kind
        )


pass_options = click.make_pass_decorator(GlobalOptions, ensure=True)


def handle_errors(fn):
    """Map package errors to exit codes (2 configuration, 1 otherwise)"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HomFilterError as e:
            print_error(str(e))
            diagnostics = getattr(e, "diagnostics", None)
            if diagnostics:
                print_error(f"Diagnostics: {diagnostics}")
            raise click.exceptions.Exit(e.exit_code)

    return wrapper


@contextmanager
def tracked(message: str):
    """Spinner whose text follows the experiment progress events"""
    with progress_status(message) as status:
        counts = {"done": 0, "label": ""}
        lock = threading.Lock()

        def on_epsilon(epsilon, index, total):
            counts["label"] = f"ε={epsilon:g} ({index + 1}/{total})"
            counts["done"] = 0
            status.update(f"{message} {counts['label']}")

        def on_replication(label, index, *args):
            with lock:
                counts["done"] += 1
                done = counts["done"]
            status.update(f"{message} {label}: {done} replications done")

        def on_node(index, total):
            status.update(f"Building drift cache: node {index + 1}/{total}")

        subscriptions = [
            (EventType.Experiment.EPSILON_STARTED, on_epsilon),
            (EventType.Experiment.REPLICATION_DONE, on_replication),
            (EventType.Experiment.REPLICATION_ABORTED, on_replication),
            (EventType.Cache.NODE_DONE, on_node),
        ]
        for event, callback in subscriptions:
            events.on(event, callback)
        try:
            yield status
        finally:
            for event, callback in subscriptions:
                events.off(event, callback)
