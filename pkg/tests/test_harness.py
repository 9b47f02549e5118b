# Tests for the experiment runners

import numpy as np
import pytest

from src.homfilter.core.config import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    config_from_mapping,
    load_config,
)
from src.homfilter.core.exceptions import ConfigurationError
from src.homfilter.core.harness import (
    RUNNERS,
    decreasing_within,
    run_experiment,
)


def test_runner_for_every_kind():
    """Test that each experiment kind has a runner"""
    assert set(RUNNERS) == set(EXPERIMENT_KINDS)


def test_decreasing_within():
    """Test monotonicity up to combined standard errors"""
    assert decreasing_within([3.0, 2.0, 1.0], [0.0, 0.0, 0.0])
    assert not decreasing_within([1.0, 2.0], [0.0, 0.0])
    assert decreasing_within([1.0, 1.2], [0.1, 0.1])
    assert decreasing_within([1.0, 0.5], [float("nan"), 0.1])


def test_strong_convergence_report(small_config):
    """Test rows and checks of a small strong-convergence sweep"""
    report = run_experiment(load_config(small_config))
    assert report.kind == "strong-convergence"
    assert len(report.rows) == 12
    errors = report.metric("strong_error")
    assert [r.epsilon for r in errors] == [0.1, 0.05, 0.02]
    assert all(r.value > 0 and r.replications == 3 for r in errors)
    deltas = [r.value for r in report.metric("delta")]
    assert deltas == pytest.approx([0.216, 0.136, 0.074])
    assert report.slope is not None
    assert report.wall_clock > 0
    assert report.notes


def test_strong_convergence_without_z_coupling(tmp_path):
    """Test that a z-free slow drift sits at the floor and passes"""
    config = config_from_mapping(
        {
            "experiment": {"kind": "strong-convergence"},
            "model": {"name": "analytic-ou", "params": {"q": 0.0}},
            "sweep": {"epsilons": [0.1, 0.05, 0.02]},
            "grid": {"dt": 0.002, "horizon": 0.5},
            "monte_carlo": {"replications": 3, "seed": 7},
            "output": {"dir": str(tmp_path / "out")},
        }
    )
    report = run_experiment(config)
    assert [r.value for r in report.metric("strong_error")] == [0.0] * 3
    assert report.slope is None
    assert [c.name for c in report.checks] == ["degenerate config at floor"]
    assert report.passed


def test_threads_do_not_change_results(small_config):
    """Test that serial and threaded sweeps agree exactly"""
    config = load_config(small_config)
    serial = run_experiment(config)
    threaded = run_experiment(config.with_overrides(threads=2))
    assert [r.value for r in serial.rows] == [r.value for r in threaded.rows]


def test_aux_scaling_report(tmp_path):
    """Test the auxiliary-process sweep rows"""
    config = config_from_mapping(
        {
            "experiment": {"kind": "aux-scaling"},
            "sweep": {"epsilons": [0.1, 0.05, 0.02]},
            "grid": {"dt": 0.002, "horizon": 0.5},
            "monte_carlo": {"replications": 3, "seed": 7},
            "output": {"dir": str(tmp_path)},
        }
    )
    report = run_experiment(config)
    assert len(report.metric("aux_sup_error")) == 3
    assert len(report.metric("aux_bound")) == 3
    assert all(np.isfinite(r.value) for r in report.metric("aux_ratio"))


def test_crosscheck_needs_levy_model():
    """Test that the FD comparison refuses sensor-noise models"""
    with pytest.raises(ConfigurationError):
        run_experiment(ExperimentConfig(kind="zakai-crosscheck"))
