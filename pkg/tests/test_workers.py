# Tests for the replication worker pool

import pytest

from src.homfilter.core.events import EventType, events
from src.homfilter.core.exceptions import (
    DivergenceError,
    ExperimentFailure,
    FilterDegeneracyError,
)
from src.homfilter.core.workers import (
    Tally,
    guarded_map,
    ordered_map,
    resolve_threads,
)


def test_resolve_threads():
    """Test that 0 means one worker per CPU"""
    assert resolve_threads(3) == 3
    assert resolve_threads(0) >= 1


def test_ordered_map_keeps_order():
    """Test that threaded results come back in input order"""
    items = list(range(50))
    assert ordered_map(lambda i: i * i, items, threads=4) == [
        i * i for i in items
    ]
    assert ordered_map(lambda i: i, [], threads=4) == []


def test_guarded_map_counts_failures():
    """Test that diverged and degenerate runs are tallied"""

    def run(index):
        if index == 3:
            raise DivergenceError("blew up", step=7)
        if index in (5, 6):
            raise FilterDegeneracyError("weights underflowed")
        return index

    tally = guarded_map(run, 10, threads=2, label="unit")
    assert tally.attempted == 10
    assert tally.values == [0, 1, 2, 4, 7, 8, 9]
    assert tally.aborts == 1
    assert tally.degenerate == 2
    assert len(tally.messages) == 3


def test_guarded_map_propagates_other_errors():
    """Test that unexpected errors are not swallowed"""

    def run(index):
        raise ValueError("bug")

    with pytest.raises(ValueError):
        guarded_map(run, 2)


def test_abort_quota():
    """Test the 0.1% abort quota"""
    with pytest.raises(ExperimentFailure) as info:
        Tally("strong", attempted=10, aborts=1).enforce_quotas()
    assert info.value.diagnostics["aborts"] == 1

    tally = Tally("strong", attempted=1000, aborts=1)
    assert tally.enforce_quotas() is tally


def test_degeneracy_quota():
    """Test the 1% degeneracy quota"""
    Tally("filter", attempted=200, degenerate=2).enforce_quotas()
    with pytest.raises(ExperimentFailure):
        Tally("filter", attempted=200, degenerate=3).enforce_quotas()


def test_replication_events():
    """Test that listeners hear about finished and aborted replications"""
    seen = []

    def on_done(label, index):
        seen.append(("done", index))

    def on_aborted(label, index, error):
        seen.append(("aborted", index))

    def run(index):
        if index == 1:
            raise DivergenceError("blew up")
        return index

    events.on(EventType.Experiment.REPLICATION_DONE, on_done)
    events.on(EventType.Experiment.REPLICATION_ABORTED, on_aborted)
    try:
        guarded_map(run, 3, label="events")
    finally:
        events.off(EventType.Experiment.REPLICATION_DONE, on_done)
        events.off(EventType.Experiment.REPLICATION_ABORTED, on_aborted)
    assert seen == [("done", 0), ("aborted", 1), ("done", 2)]


def test_listener_may_emit():
    """Test that a listener can emit another event from inside emit"""
    heard = []

    def relay(value):
        events.emit(EventType.Filter.RESAMPLED, value, 0.0)

    def on_resampled(t, ess):
        heard.append(t)

    events.on(EventType.Experiment.FINISHED, relay)
    events.on(EventType.Filter.RESAMPLED, on_resampled)
    try:
        events.emit(EventType.Experiment.FINISHED, 0.25)
    finally:
        events.off(EventType.Experiment.FINISHED, relay)
        events.off(EventType.Filter.RESAMPLED, on_resampled)
    assert heard == [0.25]
