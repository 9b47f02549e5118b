"""Thread pool helpers for independent Monte Carlo cells"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, List, TypeVar

from .events import EventType, events
from .exceptions import (
    DivergenceError,
    ExperimentFailure,
    FilterDegeneracyError,
)

T = TypeVar("T")
R = TypeVar("R")

ABORT_QUOTA = 0.001
DEGENERACY_QUOTA = 0.01


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU"""
    if threads and threads > 0:
        return int(threads)
    return os.cpu_count() or 1


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], threads: int = 1
) -> List[R]:
    """Map ``fn`` over ``items``, results in input order

    Every item must carry its own seed, so the result does not depend on
    the number of workers or on scheduling.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


@dataclass
class Tally:
    """Outcome of a batch of replications"""

    label: str
    attempted: int = 0
    values: List[Any] = field(default_factory=list)
    aborts: int = 0
    degenerate: int = 0
    messages: List[str] = field(default_factory=list)

    def enforce_quotas(self) -> "Tally":
        diagnostics = {
            "label": self.label,
            "attempted": self.attempted,
            "aborts": self.aborts,
            "degenerate": self.degenerate,
            "messages": self.messages[:5],
        }
        if self.aborts > ABORT_QUOTA * self.attempted:
            raise ExperimentFailure(
                f"{self.label}: {self.aborts} of {self.attempted} replications "
                f"aborted (quota {ABORT_QUOTA:.1%})",
                diagnostics,
            )
        if self.degenerate > DEGENERACY_QUOTA * self.attempted:
            raise ExperimentFailure(
                f"{self.label}: {self.degenerate} of {self.attempted} filter "
                f"runs degenerated (quota {DEGENERACY_QUOTA:.0%})",
                diagnostics,
            )
        return self


def guarded_map(
    fn: Callable[[int], R],
    replications: int,
    threads: int = 1,
    label: str = "",
) -> Tally:
    """Run ``fn`` for every replication index, counting failed runs

    Diverged paths and degenerate filters are tallied instead of raised;
    callers decide with ``Tally.enforce_quotas``.
    """

    def run(index: int):
        try:
            value = fn(index)
        except DivergenceError as e:
            events.emit(EventType.Experiment.REPLICATION_ABORTED, label, index, e)
            return "aborted", str(e)
        except FilterDegeneracyError as e:
            events.emit(EventType.Experiment.REPLICATION_ABORTED, label, index, e)
            return "degenerate", str(e)
        events.emit(EventType.Experiment.REPLICATION_DONE, label, index)
        return "ok", value

    tally = Tally(label=label, attempted=replications)
    for status, value in ordered_map(run, range(replications), threads):
        if status == "ok":
            tally.values.append(value)
        else:
            tally.messages.append(value)
            if status == "aborted":
                tally.aborts += 1
            else:
                tally.degenerate += 1
    return tally
