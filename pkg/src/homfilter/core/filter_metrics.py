"""Convergence metrics between ε-filters and homogenized filters"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .exceptions import ConfigurationError
from .fitting import mean_and_se
from .functions import get_function
from .models import LEVY_FAMILY, ModelSpec
from .noise import TimeGrid
from .observation import (
    LevyObservationModel,
    ObservationPath,
    SensorObservationModel,
    simulate_observation_levy,
    simulate_observation_sensor,
)
from .particle import (
    EPSILON_MODE,
    HOMOGENIZED_MODE,
    DriftFunction,
    FilterTrace,
    particle_filter_levy,
    particle_filter_sensor,
)
from .sde import sample_noise, simulate_slow_fast
from .seeding import SeedSpec, replication_seed
from .workers import Tally, guarded_map

ObservationModel = Union[SensorObservationModel, LevyObservationModel]


@dataclass(frozen=True)
class FilterSetup:
    """Everything a paired filter replication needs besides ε and a seed"""

    model: ModelSpec
    obs_model: ObservationModel
    grid: TimeGrid
    particles: int
    drift: DriftFunction
    function: str = "tanh"
    resample: bool = True
    time: Optional[float] = None
    # None starts the particles from a point mass at x0
    initial_std: Optional[float] = None

    def __post_init__(self):
        get_function(self.function)
        levy = isinstance(self.obs_model, LevyObservationModel)
        if levy != (self.model.family == LEVY_FAMILY):
            raise ConfigurationError(
                f"Model '{self.model.name}' ({self.model.family} family) does "
                f"not match the {type(self.obs_model).__name__}"
            )

    @property
    def index(self) -> int:
        if self.time is None:
            return self.grid.steps
        return self.grid.steps_in(self.time)


def observe(setup: FilterSetup, epsilon: float, seed: SeedSpec) -> ObservationPath:
    """Simulate the ε-system and its observation path"""
    levy = isinstance(setup.obs_model, LevyObservationModel)
    noise = sample_noise(
        setup.model,
        setup.grid,
        epsilon,
        seed,
        proposal=setup.obs_model.measure if levy else None,
    )
    pair = simulate_slow_fast(setup.model, epsilon, setup.grid, noise)
    if levy:
        return simulate_observation_levy(
            pair, noise.V, noise.J_lambda, setup.obs_model, setup.grid
        )
    return simulate_observation_sensor(
        pair, noise.V, noise.B, setup.obs_model, setup.grid
    )


def run_filter(
    setup: FilterSetup,
    obs_path: ObservationPath,
    seed: SeedSpec,
    mode: str,
    epsilon: Optional[float] = None,
) -> FilterTrace:
    runner = (
        particle_filter_levy
        if isinstance(setup.obs_model, LevyObservationModel)
        else particle_filter_sensor
    )
    return runner(
        obs_path,
        setup.model,
        setup.obs_model,
        setup.particles,
        seed,
        mode=mode,
        epsilon=epsilon,
        drift=setup.drift,
        functions=(setup.function,),
        resample=setup.resample,
        initial_std=setup.initial_std,
    )


@dataclass
class PairedEstimates:
    """π̂ᵉ and π̂⁰ at t* per surviving replication, on shared observations"""

    epsilon: float
    tally: Tally
    eps_values: np.ndarray
    hom_values: np.ndarray
    hom_rho1: np.ndarray


def paired_estimates(
    setup: FilterSetup,
    epsilon: float,
    replications: int,
    master_seed: int,
    threads: int = 1,
) -> PairedEstimates:
    """Run the ε-filter and the homogenized filter on the same Y per replication

    Both filters draw particle noise from the same stream path so that the
    homogenized particles share the ε-particles' slow noise.
    """
    index = setup.index

    def replicate(rep: int) -> Tuple[float, float, float]:
        seed = replication_seed(master_seed, rep)
        obs_path = observe(setup, epsilon, seed)
        eps_trace = run_filter(setup, obs_path, seed, EPSILON_MODE, epsilon)
        hom_trace = run_filter(setup, obs_path, seed, HOMOGENIZED_MODE)
        return (
            float(eps_trace.estimate(setup.function)[index]),
            float(hom_trace.estimate(setup.function)[index]),
            float(hom_trace.rho1[index]),
        )

    tally = guarded_map(
        replicate, replications, threads, label=f"ε={epsilon:g}"
    ).enforce_quotas()
    values = np.array(tally.values, dtype=float).reshape(-1, 3)
    return PairedEstimates(
        epsilon, tally, values[:, 0], values[:, 1], values[:, 2]
    )


@dataclass
class DistanceEstimate:
    epsilon: float
    value: float
    se: float
    replications: int
    aborts: int
    degenerate: int


def filter_l1_distance(
    setup: FilterSetup,
    epsilon: float,
    replications: int,
    master_seed: int,
    threads: int = 1,
) -> DistanceEstimate:
    """E|πᵉ_{t*}(φ) − π⁰_{t*}(φ)| with its Monte Carlo standard error"""
    paired = paired_estimates(setup, epsilon, replications, master_seed, threads)
    value, se = mean_and_se(np.abs(paired.eps_values - paired.hom_values))
    return DistanceEstimate(
        epsilon,
        value,
        se,
        len(paired.tally.values),
        paired.tally.aborts,
        paired.tally.degenerate,
    )


@dataclass
class InverseMoment:
    p: float
    empirical: float
    se: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound


def inverse_moment_bound(p: float, h_bound: float, horizon: float) -> float:
    """exp{(2p² + p + 1)‖h‖²∞ T / 2}"""
    return float(np.exp((2 * p**2 + p + 1) * h_bound**2 * horizon / 2))


def inverse_moment_check(
    rho1: Union[Sequence[float], Sequence[FilterTrace]],
    p: float,
    h_bound: float,
    horizon: float,
) -> InverseMoment:
    """Empirical E|ρ̂⁰_T(1)|^{-p} against its certified bound

    Accepts final ρ̂(1) values or whole homogenized filter traces.
    """
    values = np.array(
        [r.rho1[-1] if isinstance(r, FilterTrace) else r for r in rho1],
        dtype=float,
    )
    if not values.size:
        raise ConfigurationError("Inverse moment check needs filter runs")
    empirical, se = mean_and_se(np.abs(values) ** (-p))
    return InverseMoment(
        p, empirical, se, inverse_moment_bound(p, h_bound, horizon)
    )


@dataclass
class WeakDistance:
    epsilon: float
    mean_difference: float
    se: float
    ks_statistic: float
    ks_pvalue: float
    replications: int
    aborts: int
    degenerate: int


def weak_filter_distance(
    setup: FilterSetup,
    epsilons: Sequence[float],
    replications: int,
    master_seed: int,
    threads: int = 1,
) -> List[WeakDistance]:
    """Per ε: |mean(π̌ᵉ − π̌⁰)| and the two-sample KS statistic"""
    results = []
    for epsilon in epsilons:
        paired = paired_estimates(
            setup, epsilon, replications, master_seed, threads
        )
        difference, se = mean_and_se(paired.eps_values - paired.hom_values)
        ks = stats.ks_2samp(paired.eps_values, paired.hom_values)
        results.append(
            WeakDistance(
                epsilon,
                abs(difference),
                se,
                float(ks.statistic),
                float(ks.pvalue),
                len(paired.tally.values),
                paired.tally.aborts,
                paired.tally.degenerate,
            )
        )
    return results
