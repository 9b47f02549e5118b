# Tests for observation models, likelihoods and the Kalman–Bucy reference

import numpy as np
import pytest

from src.homfilter.core.exceptions import ConfigurationError, ModelError
from src.homfilter.core.noise import TimeGrid, sample_brownian
from src.homfilter.core.observation import (
    ObservationFunction,
    ObservationPath,
    SensorObservationModel,
    check_intensity,
    girsanov_weight_sensor,
    intensity_function,
    kalman_bucy_mean,
    levy_observation,
    likelihood_levy,
    likelihood_levy_euler,
    observation_function,
    sensor_observation,
    simulate_observation_levy,
    simulate_observation_sensor,
)
from src.homfilter.core.sde import sample_noise, simulate_slow_fast
from src.homfilter.core.seeding import SeedSpec


def _quiet_path(grid, **events):
    return ObservationPath(grid, np.zeros((grid.steps, 1)), **events)


def test_sensor_noise_identity():
    """Test σ3 = ρ, σ4 = √(1 − ρ²) and the conditional root"""
    model = sensor_observation(observation_function("tanh"), 0.6)
    assert model.sigma4[0, 0] == pytest.approx(0.8)
    assert model.conditional_root[0, 0] == pytest.approx(0.8)
    assert model.correlated


def test_sensor_noise_must_sum_to_identity():
    """Test σ3σ3′ + σ4σ4′ = I"""
    with pytest.raises(ConfigurationError):
        SensorObservationModel(
            observation_function("tanh"), [[0.5]], [[0.5]]
        )
    with pytest.raises(ConfigurationError):
        sensor_observation(observation_function("tanh"), 1.5)


def test_declared_bound_enforced():
    """Test that h may not exceed its declared sup-norm"""
    h = ObservationFunction("steep", lambda x: 2 * x[:, 0], 1.0)
    with pytest.raises(ConfigurationError):
        sensor_observation(h, 0.0)


def test_unknown_observation_function():
    """Test the observation function registry"""
    with pytest.raises(ConfigurationError):
        observation_function("cubic")
    with pytest.raises(ConfigurationError):
        intensity_function("exp")


def test_zero_h_has_unit_weight(grid):
    """Test that h ≡ 0 leaves log γ at zero"""
    path = ObservationPath(grid, np.ones((grid.steps, 1)) * 0.1)
    weights = girsanov_weight_sensor(
        np.zeros((grid.steps + 1, 1)), path, observation_function("zero")
    )
    assert np.all(weights == 0.0)


def test_intensity_range():
    """Test that λ must lie in (0, 1]"""
    assert check_intensity(np.array([0.2, 1.0])).tolist() == [0.2, 1.0]
    with pytest.raises(ModelError):
        check_intensity(np.array([0.0]))
    with pytest.raises(ModelError):
        check_intensity(np.array([1.2]))


def test_intensity_above_one_rejected():
    """Test λ ≤ 1 is checked when the model is built"""
    with pytest.raises(ConfigurationError):
        levy_observation(
            observation_function("tanh"),
            intensity_function("tanh", 0.9, 0.3),
            rate=2.0,
        )


def test_marks_recovered_from_jumps(levy_obs):
    """Test mark recovery through a₃"""
    marks, on_u3 = levy_obs.recover_marks(np.array([0.25, -0.1]))
    assert marks.tolist() == pytest.approx([0.5, -0.2])
    assert on_u3.all()


def test_marks_unobservable_without_f3():
    """Test that a₃ = 0 hides the marks"""
    model = levy_observation(
        observation_function("tanh"),
        intensity_function("constant", level=0.5),
        rate=2.0,
        jump_scale=0.0,
    )
    assert not model.marks_observable
    with pytest.raises(ConfigurationError):
        model.recover_marks(np.array([0.1]))


def test_compensator_only_likelihood(grid, silent_levy_obs):
    """Test log λᵉ_T = (1 − λ)·r₃·T with no events and ȟ ≡ 0"""
    X = np.zeros((grid.steps + 1, 1))
    closed = likelihood_levy(X, _quiet_path(grid), silent_levy_obs)
    assert closed[-1] == pytest.approx(2.0)

    euler = likelihood_levy_euler(X, _quiet_path(grid), silent_levy_obs)
    assert euler[-1] == pytest.approx(100 * np.log(1.02))


def test_event_adds_log_intensity(grid, silent_levy_obs):
    """Test that an observed event contributes log λ(τ, x, u)"""
    path = _quiet_path(
        grid,
        event_times=np.array([0.5]),
        event_marks=np.array([0.5]),
        event_jumps=np.array([0.25]),
    )
    X = np.zeros((grid.steps + 1, 1))
    closed = likelihood_levy(X, path, silent_levy_obs)
    assert closed[-1] == pytest.approx(2.0 + np.log(0.5))


def test_observation_values_include_events(grid):
    """Test that jumps enter Y at the end of their cell"""
    path = _quiet_path(
        grid,
        event_times=np.array([0.5]),
        event_marks=np.array([0.5]),
        event_jumps=np.array([0.25]),
    )
    values = path.values()
    assert values[49, 0] == 0.0
    assert values[50, 0] == pytest.approx(0.25)
    assert values[-1, 0] == pytest.approx(0.25)


def test_observation_coarsen(grid):
    """Test block sums of observation increments"""
    path = ObservationPath(grid, np.full((grid.steps, 1), 0.01))
    coarse = path.coarsen(2)
    assert coarse.grid.steps == 50
    assert np.allclose(coarse.increments, 0.02)
    with pytest.raises(ConfigurationError):
        path.coarsen(3)


def test_simulated_levy_events_are_thinned(levy_model, levy_obs, grid):
    """Test that accepted events are a subset of the proposals"""
    noise = sample_noise(
        levy_model, grid, 0.1, SeedSpec(21), proposal=levy_obs.measure
    )
    pair = simulate_slow_fast(levy_model, 0.1, grid, noise)
    path = simulate_observation_levy(
        pair, noise.V, noise.J_lambda, levy_obs, grid
    )
    assert path.event_count <= noise.J_lambda.count
    assert set(path.event_times) <= set(noise.J_lambda.times)
    assert np.allclose(path.event_jumps, 0.5 * path.event_marks)


def test_kalman_bucy_without_observation(grid):
    """Test that gain 0 keeps the prior mean and grows the variance"""
    path = ObservationPath(grid, np.full((grid.steps, 1), 0.3))
    mean, variance = kalman_bucy_mean(path, 0.0, 0.5, 1.5)
    assert np.all(mean == 1.5)
    assert variance[-1] == pytest.approx(0.25)


def test_sensor_noise_covariance():
    """Test Cov(ΔV, ΔY) = σ3 dt and Var(ΔY) = dt with a silent signal"""
    grid = TimeGrid.from_step(200.0, 0.01)
    obs_model = sensor_observation(observation_function("tanh"), 0.6)
    V = sample_brownian(grid, 1, SeedSpec(21, (0,)))
    B = sample_brownian(grid, 1, SeedSpec(21, (2,)))
    path = simulate_observation_sensor(
        np.zeros((grid.steps + 1, 1)), V, B, obs_model, grid
    )
    dV, dY = V.increments[:, 0], path.increments[:, 0]
    assert np.mean(dV * dY) / grid.dt == pytest.approx(0.6, abs=0.05)
    assert np.mean(dY**2) / grid.dt == pytest.approx(1.0, abs=0.05)
