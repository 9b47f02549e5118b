# Tests for the particle filters, the signal generator and the Zakai residual

import numpy as np
import pytest

from src.homfilter.core.exceptions import (
    ConfigurationError,
    FilterDegeneracyError,
)
from src.homfilter.core.models import build_model
from src.homfilter.core.noise import TimeGrid
from src.homfilter.core.observation import (
    ObservationPath,
    intensity_function,
    kalman_bucy_mean,
    levy_observation,
    observation_function,
    sensor_observation,
    simulate_observation_sensor,
)
from src.homfilter.core.particle import (
    EPSILON_MODE,
    HOMOGENIZED_MODE,
    ParticleEnsemble,
    generator_apply,
    particle_filter_levy,
    particle_filter_sensor,
    systematic_resample,
    zakai_residual,
    zakai_residual_check,
)
from src.homfilter.core.sde import sample_noise, simulate_homogenized
from src.homfilter.core.seeding import SeedSpec


def _quiet_path(grid):
    return ObservationPath(grid, np.zeros((grid.steps, 1)))


def test_systematic_resample_point_mass():
    """Test that all offspring come from the only weighted particle"""
    rng = np.random.default_rng(0)
    index = systematic_resample(np.array([0.0, 1.0, 0.0, 0.0]), rng)
    assert index.tolist() == [1, 1, 1, 1]


def test_systematic_resample_keeps_counts():
    """Test offspring counts within one of N·w"""
    rng = np.random.default_rng(1)
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    index = systematic_resample(weights, rng)
    counts = np.bincount(index, minlength=4)
    assert counts.sum() == 4
    assert np.all(np.abs(counts - 4 * weights) < 1)


def test_ensemble_degeneracy():
    """Test NaN and underflowed weights"""
    x = np.zeros((3, 1))
    with pytest.raises(FilterDegeneracyError):
        ParticleEnsemble(x, np.array([0.0, np.nan, 0.0])).log_mass()
    with pytest.raises(FilterDegeneracyError):
        ParticleEnsemble(x, np.full(3, -np.inf)).log_mass()


def test_ensemble_summaries():
    """Test ESS, ρ̂(1) and weighted estimates"""
    ensemble = ParticleEnsemble(
        np.array([[1.0], [3.0]]), np.log(np.array([1.0, 3.0]))
    )
    assert ensemble.ess == pytest.approx(1 / (0.25**2 + 0.75**2))
    assert ensemble.rho1() == pytest.approx(2.0)
    assert ensemble.rho(np.array([1.0, 1.0])) == pytest.approx(2.0)


def test_sensor_filter_without_signal_in_observation(grid, zero_drift):
    """Test that h ≡ 0 keeps weights equal"""
    model = build_model("bounded-tanh")
    obs_model = sensor_observation(observation_function("zero"), 0.5)
    trace = particle_filter_sensor(
        _quiet_path(grid),
        model,
        obs_model,
        200,
        SeedSpec(1),
        mode=HOMOGENIZED_MODE,
        drift=zero_drift,
        functions=("tanh",),
    )
    assert trace.function_names == ("one", "tanh")
    assert np.allclose(trace.estimate("one"), 1.0)
    assert np.allclose(trace.rho1, 1.0)
    assert np.allclose(trace.ess, 200)
    assert trace.resamples == 0


def test_sensor_filter_normalized(ou_model, grid):
    """Test π̂(1) = 1 at every step in ε mode"""
    obs_model = sensor_observation(observation_function("tanh", 0.5), 0.5)
    noise = sample_noise(ou_model, grid, 0.1, SeedSpec(2))
    obs_path = simulate_observation_sensor(
        np.full((grid.steps + 1, 1), 0.5), noise.V, noise.B, obs_model, grid
    )
    trace = particle_filter_sensor(
        obs_path,
        ou_model,
        obs_model,
        300,
        SeedSpec(3),
        mode=EPSILON_MODE,
        epsilon=0.1,
    )
    assert np.max(np.abs(trace.estimate("one") - 1.0)) <= 1e-12
    assert np.all(trace.ess <= 300 + 1e-9)


def test_filter_is_reproducible(ou_model, grid):
    """Test that a fixed seed reproduces the filter trace"""
    obs_model = sensor_observation(observation_function("tanh", 0.5), 0.0)
    noise = sample_noise(ou_model, grid, 0.1, SeedSpec(2))
    obs_path = simulate_observation_sensor(
        np.zeros((grid.steps + 1, 1)), noise.V, noise.B, obs_model, grid
    )

    def run():
        return particle_filter_sensor(
            obs_path, ou_model, obs_model, 100, SeedSpec(4),
            mode=EPSILON_MODE, epsilon=0.1,
        )

    assert np.array_equal(run().estimates, run().estimates)


def test_kalman_bucy_agreement(zero_drift):
    """Test the sensor filter against the Kalman–Bucy mean

    dX = σ dV and dY = X dt + dU with independent noises.
    """
    grid = TimeGrid.from_step(1.0, 0.01)
    model = build_model(
        "analytic-ou",
        {"theta": 0.0, "q": 0.0, "c1": 0.0, "sigma1": 0.5, "x0": 0.0},
    )
    obs_model = sensor_observation(
        observation_function("linear", 1.0, radius=50.0), 0.0
    )
    noise = sample_noise(model, grid, 0.1, SeedSpec(11))
    signal = simulate_homogenized(model, zero_drift, grid, noise)
    obs_path = simulate_observation_sensor(
        signal, noise.V, noise.B, obs_model, grid
    )
    trace = particle_filter_sensor(
        obs_path,
        model,
        obs_model,
        10000,
        SeedSpec(12),
        mode=HOMOGENIZED_MODE,
        drift=zero_drift,
        functions=("identity",),
    )
    mean, _ = kalman_bucy_mean(obs_path, 1.0, 0.5, 0.0)
    assert trace.final("identity") == pytest.approx(mean[-1], abs=0.05)


def test_kalman_bucy_agreement_correlated(zero_drift):
    """Test the sensor filter against the correlated Kalman–Bucy mean

    dX = σ dV and dY = X dt + ρ dV + √(1 − ρ²) dB with ρ = 0.8.
    """
    grid = TimeGrid.from_step(1.0, 0.01)
    model = build_model(
        "analytic-ou",
        {"theta": 0.0, "q": 0.0, "c1": 0.0, "sigma1": 0.5, "x0": 0.0},
    )
    obs_model = sensor_observation(
        observation_function("linear", 1.0, radius=50.0), 0.8
    )
    noise = sample_noise(model, grid, 0.1, SeedSpec(11))
    signal = simulate_homogenized(model, zero_drift, grid, noise)
    obs_path = simulate_observation_sensor(
        signal, noise.V, noise.B, obs_model, grid
    )
    trace = particle_filter_sensor(
        obs_path,
        model,
        obs_model,
        10000,
        SeedSpec(12),
        mode=HOMOGENIZED_MODE,
        drift=zero_drift,
        functions=("identity",),
    )
    mean, _ = kalman_bucy_mean(obs_path, 1.0, 0.5, 0.0, correlation=0.8)
    assert trace.final("identity") == pytest.approx(mean[-1], abs=0.05)


def test_initial_spread(ou_model, grid):
    """Test that initial_std draws the particles from N(x₀, std²)"""
    obs_model = sensor_observation(observation_function("tanh", 0.5), 0.0)
    trace = particle_filter_sensor(
        _quiet_path(grid),
        ou_model,
        obs_model,
        4000,
        SeedSpec(5),
        mode=EPSILON_MODE,
        epsilon=0.1,
        functions=("identity", "square"),
        initial_std=0.5,
    )
    x0 = float(ou_model.x0[0])
    first = trace.estimates[0]
    assert first[0] == pytest.approx(x0, abs=0.05)
    assert first[1] - first[0] ** 2 == pytest.approx(0.25, abs=0.03)
    with pytest.raises(ConfigurationError):
        particle_filter_sensor(
            _quiet_path(grid), ou_model, obs_model, 10, SeedSpec(5),
            mode=EPSILON_MODE, epsilon=0.1, initial_std=-0.1,
        )


def test_filter_argument_checks(ou_model, levy_model, levy_obs, grid):
    """Test mode, drift and family validation"""
    obs_model = sensor_observation(observation_function("tanh"), 0.5)
    path = _quiet_path(grid)
    with pytest.raises(ConfigurationError):
        particle_filter_sensor(
            path, ou_model, obs_model, 10, SeedSpec(0), mode=EPSILON_MODE
        )
    with pytest.raises(ConfigurationError):
        particle_filter_sensor(
            path, ou_model, obs_model, 10, SeedSpec(0), mode=HOMOGENIZED_MODE
        )
    with pytest.raises(ConfigurationError):
        particle_filter_sensor(
            path, ou_model, obs_model, 10, SeedSpec(0), mode="smoother"
        )
    with pytest.raises(ConfigurationError):
        particle_filter_levy(
            path, ou_model, levy_obs, 10, SeedSpec(0), drift=np.zeros_like
        )
    with pytest.raises(ConfigurationError):
        particle_filter_levy(
            path,
            levy_model,
            levy_obs,
            10,
            SeedSpec(0),
            drift=np.zeros_like,
            keep_history=True,
        )


def test_levy_filter_normalized(levy_model, levy_obs, levy_drift, grid):
    """Test π̂(1) = 1 for the Lévy filter with observed events"""
    path = ObservationPath(
        grid,
        np.zeros((grid.steps, 1)),
        event_times=np.array([0.25, 0.5]),
        event_marks=np.array([0.4, -0.8]),
        event_jumps=np.array([0.2, -0.4]),
    )
    trace = particle_filter_levy(
        path, levy_model, levy_obs, 200, SeedSpec(5), drift=levy_drift
    )
    assert np.max(np.abs(trace.estimate("one") - 1.0)) <= 1e-12


def test_history_recorded_per_step(levy_model, levy_obs, levy_drift, grid):
    """Test N + 1 recorded ensembles for an unresampled run"""
    trace = particle_filter_levy(
        _quiet_path(grid),
        levy_model,
        levy_obs,
        50,
        SeedSpec(5),
        drift=levy_drift,
        resample=False,
        keep_history=True,
    )
    assert len(trace.history) == grid.steps + 1
    assert trace.history.x[0].shape == (50, 1)


def test_generator_on_square():
    """Test L x² = 2x·b̌₁ + σ̌₀² + σ̌₁² + r₁c₁²E[u²] at x = 0"""
    model = build_model("levy-correlated")
    x = np.zeros((1, 1))
    z = np.array([[0.7]])
    value = generator_apply(model, "square", x, z)
    assert value[0] == pytest.approx(0.3**2 + 0.4**2 + 1.0 * 0.3**2 / 3)


def test_generator_on_identity():
    """Test that the jump term cancels for linear ψ"""
    model = build_model("levy-correlated")
    x = np.array([[0.2], [-1.0]])
    z = np.array([[0.5], [0.1]])
    value = generator_apply(model, "identity", x, z)
    assert np.allclose(value, model.b1(x, z)[:, 0])


def test_generator_needs_z_or_drift():
    """Test argument validation"""
    with pytest.raises(ConfigurationError):
        generator_apply(build_model("levy-correlated"), "tanh", [[0.0]])


def test_residual_vanishes_for_trivial_case(levy_model, levy_drift, grid):
    """Test R ≡ 0 for ψ ≡ 1, ȟ ≡ 0 and λ ≡ 1"""
    obs_model = levy_observation(
        observation_function("zero"),
        intensity_function("constant", level=1.0),
        rate=2.0,
    )
    path = _quiet_path(grid)
    trace = particle_filter_levy(
        path,
        levy_model,
        obs_model,
        100,
        SeedSpec(6),
        drift=levy_drift,
        functions=("tanh",),
        resample=False,
        keep_history=True,
    )
    assert zakai_residual_check(
        trace, "one", path, levy_model, obs_model, levy_drift
    ) == pytest.approx(0.0, abs=1e-12)


def test_residual_compensator_is_first_order(
    levy_model, levy_drift, silent_levy_obs
):
    """Test that the pure-compensator residual halves with dt"""

    def residual(dt):
        grid = TimeGrid.from_step(1.0, dt)
        path = _quiet_path(grid)
        trace = particle_filter_levy(
            path,
            levy_model,
            silent_levy_obs,
            20,
            SeedSpec(7),
            drift=levy_drift,
            resample=False,
            keep_history=True,
        )
        values = zakai_residual(
            trace, "one", path, levy_model, silent_levy_obs, levy_drift
        )
        assert values.shape == (grid.steps,)
        return float(np.max(np.abs(values)))

    coarse, fine = residual(0.01), residual(0.005)
    assert coarse < 0.1
    assert 0.45 < fine / coarse < 0.55


def test_residual_rejects_resampled_trace(
    levy_model, levy_obs, levy_drift, grid
):
    """Test that the residual needs per-step ensembles"""
    path = _quiet_path(grid)
    trace = particle_filter_levy(
        path, levy_model, levy_obs, 20, SeedSpec(8), drift=levy_drift
    )
    with pytest.raises(ConfigurationError):
        zakai_residual(trace, "tanh", path, levy_model, levy_obs, levy_drift)
