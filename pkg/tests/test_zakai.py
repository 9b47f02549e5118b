# Tests for the finite-difference Zakai solver

import numpy as np
import pytest

from src.homfilter.core.exceptions import ConfigurationError, UnderflowError
from src.homfilter.core.filter_metrics import FilterSetup, observe, run_filter
from src.homfilter.core.models import build_model
from src.homfilter.core.noise import TimeGrid
from src.homfilter.core.observation import (
    ObservationPath,
    intensity_function,
    levy_observation,
    observation_function,
)
from src.homfilter.core.particle import HOMOGENIZED_MODE
from src.homfilter.core.seeding import SeedSpec, replication_seed
from src.homfilter.core.zakai import (
    DensityGrid,
    fd_filter_estimate,
    run_fd_filter,
    zakai_fd_jump_update,
    zakai_fd_step,
)


@pytest.fixture
def flat_obs():
    """ȟ ≡ 0 with λ ≡ 1, so only the Fokker–Planck half acts"""
    return levy_observation(
        observation_function("zero"),
        intensity_function("constant", level=1.0),
        rate=2.0,
    )


def test_initial_density_has_unit_mass():
    """Test point-mass and Gaussian initial densities"""
    point = DensityGrid.initial(-6.0, 6.0, 400, 0.5)
    assert point.mass() == pytest.approx(1.0)
    assert np.count_nonzero(point.q) == 1

    gaussian = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    assert gaussian.mass() == pytest.approx(1.0)
    assert gaussian.dx == pytest.approx(0.03)


def test_initial_density_validation():
    """Test grid range checks"""
    with pytest.raises(ConfigurationError):
        DensityGrid.initial(-1.0, 1.0, 2, 0.0)
    with pytest.raises(ConfigurationError):
        DensityGrid.initial(-1.0, 1.0, 100, 3.0)


def test_implicit_step_conserves_mass(levy_model, levy_drift, flat_obs):
    """Test that the flux form keeps Δx·Σq"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    for _ in range(20):
        state = zakai_fd_step(
            state, levy_model, flat_obs, levy_drift, 0.0, 0.01
        )
    assert state.mass() == pytest.approx(1.0, abs=1e-10)
    assert state.clipped == 0
    assert state.t == pytest.approx(0.2)


def test_explicit_step_conserves_mass(levy_model, levy_drift, flat_obs):
    """Test the explicit branch under its CFL limit"""
    state = DensityGrid.initial(-6.0, 6.0, 200, 0.0, std=0.5)
    # dt·a/Δx² = 0.001·0.25/0.0036 ≈ 0.07
    state = zakai_fd_step(
        state, levy_model, flat_obs, levy_drift, 0.0, 0.001, implicit=False
    )
    assert state.mass() == pytest.approx(1.0, abs=1e-10)


def test_explicit_step_cfl_guard(levy_model, levy_drift, flat_obs):
    """Test that the explicit branch refuses unstable steps"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    with pytest.raises(ConfigurationError):
        zakai_fd_step(
            state, levy_model, flat_obs, levy_drift, 0.0, 0.1, implicit=False
        )


def test_compensator_scales_mass(levy_model, levy_drift, silent_levy_obs):
    """Test q ← q·exp(dt∫(1 − λ)ν₃) with λ ≡ 0.5 and r₃ = 4"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    stepped = zakai_fd_step(
        state, levy_model, silent_levy_obs, levy_drift, 0.0, 0.01
    )
    assert stepped.mass() == pytest.approx(np.exp(0.02))


def test_jump_update_constant_intensity(silent_levy_obs):
    """Test that λ ≡ 0.5 halves the mass"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    updated = zakai_fd_jump_update(state, 0.3, 0.2, silent_levy_obs)
    assert updated.mass() == pytest.approx(0.5)
    assert fd_filter_estimate(updated, "tanh") == pytest.approx(
        fd_filter_estimate(state, "tanh")
    )


def test_signal_jumps_rejected(flat_obs, levy_drift):
    """Test that the oracle needs c1 = 0"""
    model = build_model("levy-correlated")
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0)
    with pytest.raises(ConfigurationError):
        zakai_fd_step(state, model, flat_obs, levy_drift, 0.0, 0.01)


def test_estimate_of_empty_density():
    """Test that zero mass cannot be normalized"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0)
    state.q[:] = 0.0
    with pytest.raises(UnderflowError):
        fd_filter_estimate(state, "one")


def test_symmetric_density_estimates():
    """Test ∫φq/∫q on a centered Gaussian"""
    state = DensityGrid.initial(-6.0, 6.0, 400, 0.0, std=0.5)
    assert fd_filter_estimate(state, "one") == pytest.approx(1.0)
    assert fd_filter_estimate(state, "tanh") == pytest.approx(0.0, abs=1e-12)


def test_run_writes_snapshots(levy_model, levy_drift, flat_obs, grid, tmp_path):
    """Test a full FD run with density snapshots"""
    path = ObservationPath(grid, np.zeros((grid.steps, 1)))
    run = run_fd_filter(
        path,
        levy_model,
        flat_obs,
        levy_drift,
        cells=200,
        functions=("one", "tanh"),
        initial_std=0.3,
        snapshot_times=(0.5, 1.0),
        snapshot_dir=tmp_path,
    )
    assert run.trace.mode == "fd"
    assert np.allclose(run.trace.estimate("one"), 1.0)
    assert [p.name for p in run.snapshots] == [
        "density_t0.5.csv",
        "density_t1.csv",
    ]
    assert all(p.exists() for p in run.snapshots)
    assert run.clipped_fraction == 0.0


def test_snapshots_need_directory(levy_model, levy_drift, flat_obs, grid):
    """Test snapshot configuration"""
    path = ObservationPath(grid, np.zeros((grid.steps, 1)))
    with pytest.raises(ConfigurationError):
        run_fd_filter(
            path, levy_model, flat_obs, levy_drift, snapshot_times=(0.5,)
        )


def test_particle_filter_agrees_with_fd(levy_model, levy_obs, levy_drift):
    """Test the homogenized particle filter against the FD oracle"""
    grid = TimeGrid.from_step(0.5, 0.01)
    setup = FilterSetup(
        levy_model, levy_obs, grid, 5000, levy_drift, initial_std=0.1
    )
    seed = replication_seed(20240917, 0)
    obs_path = observe(setup, 0.1, seed)

    trace = run_filter(setup, obs_path, SeedSpec(99), HOMOGENIZED_MODE)
    fd = run_fd_filter(
        obs_path,
        levy_model,
        levy_obs,
        levy_drift,
        functions=("tanh",),
        initial_std=0.1,
    )
    pf, oracle = trace.estimate("tanh"), fd.trace.estimate("tanh")
    assert pf[0] == pytest.approx(oracle[0], abs=0.01)
    assert pf[grid.steps // 4] == pytest.approx(
        oracle[grid.steps // 4], abs=0.06
    )
    assert trace.final("tanh") == pytest.approx(
        fd.trace.final("tanh"), abs=0.06
    )
