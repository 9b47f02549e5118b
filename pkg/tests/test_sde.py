# Tests for the slow-fast Euler schemes

import numpy as np
import pytest

from src.homfilter.core.exceptions import ConfigurationError, StabilityError
from src.homfilter.core.marks import MarkLaw
from src.homfilter.core.noise import JumpStream
from src.homfilter.core.sde import (
    BatchJumps,
    NoiseBundle,
    PathPair,
    aux_error_bound,
    check_resolution,
    rate_profile,
    sample_noise,
    simulate_auxiliary,
    simulate_homogenized,
    simulate_slow_fast,
    strong_error,
)
from src.homfilter.core.seeding import SeedSpec


def test_resolution_guard():
    """Test dt ≤ ε/10"""
    check_resolution(0.1, 0.01)
    with pytest.raises(StabilityError):
        check_resolution(0.05, 0.01)
    with pytest.raises(ConfigurationError):
        check_resolution(1.5, 0.01)


def test_zero_noise_fixed_point(ou_model, grid, zero_drift):
    """Test that zero drift and zero noise keep X at x₀"""
    noise = NoiseBundle.zero(ou_model, grid)
    path = simulate_homogenized(ou_model, zero_drift, grid, noise)
    assert path.X.shape == (101, 1)
    assert np.allclose(path.X, 0.5)


def test_paths_deterministic_per_seed(ou_model, grid):
    """Test that the same seed reproduces the same slow-fast path"""
    first = sample_noise(ou_model, grid, 0.1, SeedSpec(3, (0,)))
    second = sample_noise(ou_model, grid, 0.1, SeedSpec(3, (0,)))
    assert first.checksum() == second.checksum()

    a = simulate_slow_fast(ou_model, 0.1, grid, first)
    b = simulate_slow_fast(ou_model, 0.1, grid, second)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.Z, b.Z)


def test_shared_slow_noise(ou_model, grid, zero_drift):
    """Test that Xᵉ and X⁰ are driven by the same slow noise"""
    noise = sample_noise(ou_model, grid, 0.1, SeedSpec(4))
    eps_path = simulate_slow_fast(ou_model, 0.1, grid, noise)
    hom_path = simulate_homogenized(ou_model, zero_drift, grid, noise)
    assert eps_path.noise_checksum == hom_path.noise_checksum
    assert hom_path.Z is None


def test_epsilon_changes_only_fast_jumps(ou_model, grid):
    """Test that the slow noise does not depend on ε"""
    coarse = sample_noise(ou_model, grid, 0.1, SeedSpec(4))
    fine = sample_noise(ou_model, grid, 0.05, SeedSpec(4))
    assert coarse.checksum() == fine.checksum()
    assert fine.J2.intensity == pytest.approx(2 * coarse.J2.intensity)


def test_jumps_in_one_cell_compose(grid):
    """Test that two jumps in one cell see each other's result"""
    stream = JumpStream(
        grid,
        np.array([0.002, 0.005]),
        np.array([1.0, 1.0]),
        1.0,
        1.0,
        MarkLaw("uniform"),
    )
    jumps = BatchJumps([stream], grid.steps)
    state = np.array([[1.0]])
    state = jumps.apply(0, state, lambda rows, cur, u: cur)
    assert state[0, 0] == pytest.approx(4.0)
    assert jumps.count == 2


def test_auxiliary_matches_fast_after_anchor(ou_model, grid):
    """Test that Ẑ restarts from Z at each δ-cell

    One step after a cell start, Ẑ and Z use the same frozen x, the same
    increment and the same jumps.
    """
    noise = sample_noise(ou_model, grid, 0.1, SeedSpec(8))
    pair = simulate_slow_fast(ou_model, 0.1, grid, noise)
    zhat = simulate_auxiliary(ou_model, 0.1, 0.1, pair, noise)
    assert np.allclose(zhat[1::10], pair.Z[1::10])
    assert zhat[0, 0] == pair.Z[0, 0]


def test_auxiliary_rejects_off_grid_delta(ou_model, grid):
    """Test that δ must be a multiple of dt"""
    noise = sample_noise(ou_model, grid, 0.1, SeedSpec(8))
    pair = simulate_slow_fast(ou_model, 0.1, grid, noise)
    with pytest.raises(ConfigurationError):
        simulate_auxiliary(ou_model, 0.1, 0.015, pair, noise)


def test_strong_error_of_identical_paths(grid):
    """Test that identical paths have zero error"""
    X = np.linspace(0, 1, grid.steps + 1)[:, None]
    paths = [PathPair(grid, X), PathPair(grid, X)]
    value, se = strong_error(paths, paths)
    assert value == 0.0
    assert se == 0.0


def test_strong_error_mismatched_counts(grid):
    """Test replication-count validation"""
    X = np.zeros((grid.steps + 1, 1))
    with pytest.raises(ConfigurationError):
        strong_error([PathPair(grid, X)], [])


def test_rate_profile():
    """Test ε/δ + (δ+1)δ + (δ+1)δ²/ε"""
    assert rate_profile(0.01, 0.1) == pytest.approx(0.1 + 0.11 + 1.1)


def test_aux_bound_scales_with_delta(ou_model):
    """Test the δ²/ε shape of the auxiliary-process bound"""
    small = aux_error_bound(ou_model, 0.01, 0.05)
    large = aux_error_bound(ou_model, 0.01, 0.1)
    assert large / small == pytest.approx(4 * 1.1 / 1.05)
