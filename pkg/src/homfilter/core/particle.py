"""Weighted particle filters for the sensor and Lévy observation models.

Particles evolve under the reference measure, where the observation's
continuous part is a Brownian motion. Weights carry the Girsanov density
in log form; the unnormalized filter is ρ̂(φ) = mean(exp(logw)·φ(x)).
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .events import EventType, events
from .exceptions import (
    ConfigurationError,
    DivergenceError,
    FilterDegeneracyError,
)
from .functions import (
    DEFAULT_TEST_FUNCTIONS,
    TestFunction,
    get_function,
)
from .models import LEVY_FAMILY, JumpMeasure, ModelSpec
from .observation import (
    LevyObservationModel,
    ObservationPath,
    SensorObservationModel,
    check_intensity,
)
from .sde import check_resolution, fast_step, slow_step
from .seeding import Process, SeedSpec

EPSILON_MODE = "epsilon"
HOMOGENIZED_MODE = "homogenized"
FILTER_MODES = (EPSILON_MODE, HOMOGENIZED_MODE)

DriftFunction = Callable[[np.ndarray], np.ndarray]


@dataclass
class ParticleEnsemble:
    """Weighted particles at one time; z is carried in epsilon mode"""

    x: np.ndarray
    log_weights: np.ndarray
    t: float = 0.0
    z: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.log_weights.size)

    def log_mass(self) -> float:
        """log Σ exp(logw)"""
        if np.any(np.isnan(self.log_weights)):
            raise FilterDegeneracyError(
                f"NaN particle weights at t={self.t:g}"
            )
        total = float(logsumexp(self.log_weights))
        if not np.isfinite(total):
            raise FilterDegeneracyError(
                f"All particle weights underflowed at t={self.t:g}"
            )
        return total

    def normalized_weights(self) -> np.ndarray:
        weights = np.exp(self.log_weights - self.log_mass())
        return weights / weights.sum()

    @property
    def ess(self) -> float:
        weights = self.normalized_weights()
        return float(1.0 / np.sum(weights**2))

    def estimate(self, fn: TestFunction) -> float:
        """π̂(φ) = Σ w̄ᵢ φ(xᵢ)"""
        return float(self.normalized_weights() @ fn(self.x))

    def rho(self, values: np.ndarray) -> float:
        """ρ̂ of per-particle values: mean(exp(logw) · values)"""
        return float(np.mean(np.exp(self.log_weights) * values))

    def rho1(self) -> float:
        return float(np.exp(self.log_mass() - np.log(self.size)))


@dataclass
class EnsembleHistory:
    """Per-step ensembles, recorded before the cell's jump events"""

    x: List[np.ndarray] = field(default_factory=list)
    log_weights: List[np.ndarray] = field(default_factory=list)
    z: List[Optional[np.ndarray]] = field(default_factory=list)

    def record(self, ensemble: ParticleEnsemble) -> None:
        self.x.append(ensemble.x.copy())
        self.log_weights.append(ensemble.log_weights.copy())
        self.z.append(None if ensemble.z is None else ensemble.z.copy())

    def __len__(self) -> int:
        return len(self.x)

    def ensemble(self, k: int, t: float) -> ParticleEnsemble:
        return ParticleEnsemble(self.x[k], self.log_weights[k], t, self.z[k])


@dataclass
class FilterTrace:
    """Filter estimates π̂ₜ(φ), ρ̂ₜ(1) and ESS on the observation grid"""

    times: np.ndarray
    function_names: Tuple[str, ...]
    estimates: np.ndarray
    rho1: np.ndarray
    ess: np.ndarray
    mode: str = HOMOGENIZED_MODE
    resamples: int = 0
    history: Optional[EnsembleHistory] = None

    def estimate(self, name: str) -> np.ndarray:
        try:
            column = self.function_names.index(name)
        except ValueError:
            raise ConfigurationError(f"Trace has no estimates for '{name}'")
        return self.estimates[:, column]

    def final(self, name: str) -> float:
        return float(self.estimate(name)[-1])

    def to_csv(self, path: Path) -> Path:
        """Long format: t, phi_id, pi_hat, rho1_hat, ess"""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "phi_id", "pi_hat", "rho1_hat", "ess"])
            for k, t in enumerate(self.times):
                for j, name in enumerate(self.function_names):
                    writer.writerow(
                        [
                            f"{t:.17g}",
                            name,
                            f"{self.estimates[k, j]:.17g}",
                            f"{self.rho1[k]:.17g}",
                            f"{self.ess[k]:.17g}",
                        ]
                    )
        return path


def systematic_resample(
    weights: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Indices drawn by systematic resampling of normalized weights"""
    count = weights.size
    positions = (rng.uniform() + np.arange(count)) / count
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right").clip(
        0, count - 1
    )


def _resolve_functions(
    functions: Sequence[Union[str, TestFunction]]
) -> Tuple[TestFunction, ...]:
    resolved = [
        f if isinstance(f, TestFunction) else get_function(f)
        for f in functions
    ]
    if not any(f.name == "one" for f in resolved):
        resolved.insert(0, get_function("one"))
    return tuple(resolved)


def _fresh_jumps(
    rng: np.random.Generator,
    measure: JumpMeasure,
    rate_scale: float,
    dt: float,
    state: np.ndarray,
    jump: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """Apply independent compound Poisson jumps to every particle"""
    if not measure.rate:
        return state
    counts = rng.poisson(measure.rate * rate_scale * dt, size=state.shape[0])
    total = int(counts.sum())
    if not total:
        return state
    members = np.repeat(np.arange(state.shape[0]), counts)
    marks = measure.mark_law.sample(rng, total)
    rank = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    for level in range(int(counts.max())):
        pick = rank == level
        rows = members[pick]
        state[rows] += jump(rows, state[rows], marks[pick])
    return state


@dataclass
class _Propagator:
    """Moves particles one Euler step given their V-increments"""

    model: ModelSpec
    mode: str
    epsilon: Optional[float]
    drift: Optional[DriftFunction]
    rng: np.random.Generator

    def __call__(
        self,
        x: np.ndarray,
        z: Optional[np.ndarray],
        dV: np.ndarray,
        dt: float,
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        model, rng = self.model, self.rng
        count = x.shape[0]
        drift = model.b1(x, z) if self.mode == EPSILON_MODE else self.drift(x)
        dB = None
        if model.family == LEVY_FAMILY:
            dB = rng.standard_normal((count, model.dims["j"])) * np.sqrt(dt)
        x_next = slow_step(model, x, drift, dt, dV, dB)
        x_next = _fresh_jumps(
            rng, model.jump1, 1.0, dt, x_next,
            lambda rows, cur, u: model.f1(cur, u),
        )

        z_next = z
        if self.mode == EPSILON_MODE:
            scale = 1.0 / self.epsilon
            dW = rng.standard_normal((count, model.m)) * np.sqrt(dt)
            z_next = fast_step(model, x, z, dt, scale, dW)
            z_next = _fresh_jumps(
                rng, model.jump2, scale, dt, z_next,
                lambda rows, cur, u: model.f2(x[rows], cur, u),
            )
            if not np.all(np.isfinite(z_next)):
                raise DivergenceError("Non-finite fast particle state")
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError("Non-finite particle state")
        return x_next, z_next


def _setup(
    model: ModelSpec,
    grid_dt: float,
    particles: int,
    mode: str,
    epsilon: Optional[float],
    drift: Optional[DriftFunction],
    seed: SeedSpec,
    initial_std: Optional[float] = None,
) -> Tuple[ParticleEnsemble, _Propagator, np.random.Generator]:
    if particles < 1:
        raise ConfigurationError(f"Particle count must be ≥ 1, got {particles}")
    if mode not in FILTER_MODES:
        raise ConfigurationError(
            f"Filter mode must be one of {', '.join(FILTER_MODES)}"
        )
    if mode == EPSILON_MODE:
        if epsilon is None:
            raise ConfigurationError("Epsilon-mode filtering needs ε")
        check_resolution(epsilon, grid_dt)
    elif drift is None:
        raise ConfigurationError(
            "Homogenized filtering needs an averaged drift (drift cache)"
        )
    if initial_std is not None and initial_std < 0:
        raise ConfigurationError(
            f"Initial spread must be ≥ 0, got {initial_std}"
        )
    x = np.tile(model.x0, (particles, 1))
    if initial_std:
        rng = seed.child(Process.INITIAL).generator()
        x = x + initial_std * rng.standard_normal(x.shape)
    ensemble = ParticleEnsemble(
        x=x,
        log_weights=np.zeros(particles),
        t=0.0,
        z=np.tile(model.z0, (particles, 1)) if mode == EPSILON_MODE else None,
    )
    propagate = _Propagator(
        model, mode, epsilon, drift, seed.child(Process.PARTICLES).generator()
    )
    return ensemble, propagate, seed.child(Process.RESAMPLING).generator()


class _Recorder:
    def __init__(self, grid, functions, keep_history):
        self.functions = functions
        self.estimates = np.empty((grid.steps + 1, len(functions)))
        self.rho1 = np.empty(grid.steps + 1)
        self.ess = np.empty(grid.steps + 1)
        self.history = EnsembleHistory() if keep_history else None

    def record(self, k: int, ensemble: ParticleEnsemble) -> None:
        weights = ensemble.normalized_weights()
        for j, fn in enumerate(self.functions):
            self.estimates[k, j] = float(weights @ fn(ensemble.x))
        self.rho1[k] = ensemble.rho1()
        self.ess[k] = float(1.0 / np.sum(weights**2))


def _maybe_resample(
    ensemble: ParticleEnsemble,
    rng: np.random.Generator,
    enabled: bool,
) -> bool:
    if not enabled:
        return False
    weights = ensemble.normalized_weights()
    ess = 1.0 / np.sum(weights**2)
    if ess >= ensemble.size / 2:
        return False
    log_mass = ensemble.log_mass()
    index = systematic_resample(weights, rng)
    ensemble.x = ensemble.x[index]
    if ensemble.z is not None:
        ensemble.z = ensemble.z[index]
    # keeps ρ̂(1) unchanged
    ensemble.log_weights = np.full(
        ensemble.size, log_mass - np.log(ensemble.size)
    )
    events.emit(EventType.Filter.RESAMPLED, ensemble.t, ess)
    return True


def particle_filter_sensor(
    obs_path: ObservationPath,
    model: ModelSpec,
    obs_model: SensorObservationModel,
    particles: int,
    seed: SeedSpec,
    *,
    mode: str = HOMOGENIZED_MODE,
    epsilon: Optional[float] = None,
    drift: Optional[DriftFunction] = None,
    functions: Sequence[Union[str, TestFunction]] = DEFAULT_TEST_FUNCTIONS,
    resample: bool = True,
    initial_std: Optional[float] = None,
) -> FilterTrace:
    """Particle filter for the correlated sensor-noise model

    Each particle's V-increment is drawn from its conditional law given
    the observation, ΔV = σ₃′(ΔY − h(x)dt) + S ΔṼ with
    S = (I − σ₃′σ₃)^{1/2}. ``initial_std`` spreads the particles as
    N(x₀, initial_std²) instead of a point mass.
    """
    grid = obs_path.grid
    if obs_path.d != obs_model.d:
        raise ConfigurationError("Observation path and model dimensions differ")
    dt = grid.dt
    ensemble, propagate, resampler = _setup(
        model, dt, particles, mode, epsilon, drift, seed, initial_std
    )
    functions = _resolve_functions(functions)
    recorder = _Recorder(grid, functions, False)
    recorder.record(0, ensemble)
    root = obs_model.conditional_root
    resamples = 0

    for k in range(grid.steps):
        dY = obs_path.increments[k]
        h = obs_model.h(ensemble.x, obs_model.d)
        ensemble.log_weights = (
            ensemble.log_weights + h @ dY - 0.5 * np.sum(h**2, axis=1) * dt
        )
        fresh = propagate.rng.standard_normal(
            (ensemble.size, root.shape[0])
        ) * np.sqrt(dt)
        dV = (dY - h * dt) @ obs_model.sigma3 + fresh @ root.T
        ensemble.x, ensemble.z = propagate(ensemble.x, ensemble.z, dV, dt)
        ensemble.t = grid.times[k + 1]
        resamples += _maybe_resample(ensemble, resampler, resample)
        recorder.record(k + 1, ensemble)

    return FilterTrace(
        times=grid.times,
        function_names=tuple(f.name for f in functions),
        estimates=recorder.estimates,
        rho1=recorder.rho1,
        ess=recorder.ess,
        mode=mode,
        resamples=resamples,
    )


def observed_events(
    obs_path: ObservationPath, obs_model: LevyObservationModel
) -> Dict[int, List[Tuple[float, float]]]:
    """Observed U₃ events (τ, u) grouped by grid cell"""
    grouped: Dict[int, List[Tuple[float, float]]] = {}
    if not obs_path.event_count:
        return grouped
    marks, on_u3 = obs_model.recover_marks(obs_path.event_jumps)
    for tau, k, u, inside in zip(
        obs_path.event_times, obs_path.event_cells(), marks, on_u3
    ):
        if inside:
            grouped.setdefault(int(k), []).append((float(tau), float(u)))
    return grouped


def particle_filter_levy(
    obs_path: ObservationPath,
    model: ModelSpec,
    obs_model: LevyObservationModel,
    particles: int,
    seed: SeedSpec,
    *,
    mode: str = HOMOGENIZED_MODE,
    epsilon: Optional[float] = None,
    drift: Optional[DriftFunction] = None,
    functions: Sequence[Union[str, TestFunction]] = DEFAULT_TEST_FUNCTIONS,
    resample: bool = True,
    keep_history: bool = False,
    initial_std: Optional[float] = None,
) -> FilterTrace:
    """Particle filter for the correlated Lévy-noise model

    Particles are driven by ΔV = ΔV̌ − ȟ(x)dt through σ̌₁, by fresh B
    through σ̌₀ and by fresh signal jumps. Observed U₃ events multiply
    the weights by λ(τ, x, u) at the start of their cell.
    """
    if model.family != LEVY_FAMILY:
        raise ConfigurationError(
            f"Model '{model.name}' is not a Lévy-noise model"
        )
    if not obs_model.marks_observable:
        raise ConfigurationError(
            "Filtering needs observable marks (observation.jump_scale ≠ 0)"
        )
    if keep_history and resample:
        raise ConfigurationError(
            "Ensemble history is recorded only without resampling"
        )
    grid = obs_path.grid
    dt = grid.dt
    ensemble, propagate, resampler = _setup(
        model, dt, particles, mode, epsilon, drift, seed, initial_std
    )
    functions = _resolve_functions(functions)
    recorder = _Recorder(grid, functions, keep_history)
    recorder.record(0, ensemble)
    by_cell = observed_events(obs_path, obs_model)
    resamples = 0

    for k in range(grid.steps):
        t = grid.times[k]
        if recorder.history is not None:
            recorder.history.record(ensemble)
        for tau, u in by_cell.get(k, ()):
            intensity = check_intensity(
                obs_model.intensity(tau, ensemble.x, u)
            ).reshape(-1)
            ensemble.log_weights = ensemble.log_weights + np.log(intensity)

        dV_obs = obs_path.increments[k, 0]
        h = obs_model.h(ensemble.x, 1)
        ensemble.log_weights = (
            ensemble.log_weights
            + h[:, 0] * dV_obs
            - 0.5 * h[:, 0] ** 2 * dt
            + dt * obs_model.compensator(t, ensemble.x)
        )
        dV = dV_obs - h * dt
        ensemble.x, ensemble.z = propagate(ensemble.x, ensemble.z, dV, dt)
        ensemble.t = grid.times[k + 1]
        resamples += _maybe_resample(ensemble, resampler, resample)
        recorder.record(k + 1, ensemble)

    if recorder.history is not None:
        recorder.history.record(ensemble)

    return FilterTrace(
        times=grid.times,
        function_names=tuple(f.name for f in functions),
        estimates=recorder.estimates,
        rho1=recorder.rho1,
        ess=recorder.ess,
        mode=mode,
        resamples=resamples,
        history=recorder.history,
    )


def generator_apply(
    model: ModelSpec,
    psi: Union[str, TestFunction],
    x: np.ndarray,
    z: Optional[np.ndarray] = None,
    drift: Optional[DriftFunction] = None,
) -> np.ndarray:
    """Signal generator applied to ψ at (x, z), shape (B,)

    ∂ψ·b̌₁ + ½∂²ψ:(σ̌₀σ̌₀′ + σ̌₁σ̌₁′) + ∫[ψ(x+f̌₁) − ψ(x) − ∂ψ·f̌₁] ν₁(du).
    Without z the averaged drift replaces b̌₁.
    """
    psi = psi if isinstance(psi, TestFunction) else get_function(psi)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if z is not None:
        b = model.b1(x, np.atleast_2d(z))
    elif drift is not None:
        b = drift(x)
    else:
        raise ConfigurationError("generator_apply needs z or a drift")

    gradient = psi.gradient(x)
    value = np.sum(gradient * b, axis=1) + 0.5 * np.einsum(
        "bij,bij->b", psi.hessian(x), model.diffusion_trace(x)
    )

    if model.jump1.rate:
        nodes, weights = model.jump1.mark_law.quadrature()
        order, batch = nodes.size, x.shape[0]
        xr = np.repeat(x, order, axis=0)
        jump = model.f1(xr, np.tile(nodes, batch))
        integrand = (
            psi.value(xr + jump)
            - psi.value(xr)
            - np.sum(np.repeat(gradient, order, axis=0) * jump, axis=1)
        )
        value = value + model.jump1.rate * (
            integrand.reshape(batch, order) @ weights
        )
    return value


def zakai_residual(
    trace: FilterTrace,
    psi: Union[str, TestFunction],
    obs_path: ObservationPath,
    model: ModelSpec,
    obs_model: LevyObservationModel,
    drift: Optional[DriftFunction] = None,
) -> np.ndarray:
    """Discrete Zakai residual R(t_k), k = 1..N, of an unresampled run

    Continuous terms use the ensemble after the cell's jump events and
    include the second-order Itô–Taylor term ½ρ̂(Kψ)((ΔV̌)² − dt) of the
    particle update, so the remainder is first order in dt.
    """
    psi = psi if isinstance(psi, TestFunction) else get_function(psi)
    history = trace.history
    grid = obs_path.grid
    if history is None or len(history) != grid.steps + 1:
        raise ConfigurationError(
            "Residual check needs a trace with per-step ensembles"
        )
    if trace.resamples:
        raise ConfigurationError(
            "Residual check needs a run without resampling"
        )
    dt = grid.dt
    by_cell = observed_events(obs_path, obs_model)
    residual = np.empty(grid.steps)
    integrated = 0.0
    size = history.x[0].shape[0]

    def rho(log_weights, values):
        return float(np.sum(np.exp(log_weights) * values) / size)

    start = rho(history.log_weights[0], psi.value(history.x[0]))

    for k in range(grid.steps):
        t = grid.times[k]
        x, z = history.x[k], history.z[k]
        log_weights = history.log_weights[k].copy()
        psi_x = psi.value(x)

        for tau, u in by_cell.get(k, ()):
            intensity = check_intensity(
                obs_model.intensity(tau, x, u)
            ).reshape(-1)
            integrated += rho(log_weights, psi_x * (intensity - 1.0))
            log_weights = log_weights + np.log(intensity)

        dV = obs_path.increments[k, :1]
        h = obs_model.h(x, 1)
        gradient = psi.gradient(x)
        s1 = model.sigma1(x)
        sg = np.einsum("bnl,bn->bl", s1, gradient)
        generator = generator_apply(model, psi, x, z, drift)
        noise = (psi_x[:, None] * h + sg) @ dV

        quad = np.outer(dV, dV) - dt * np.eye(dV.size)
        curvature = np.einsum("bnl,bnm,bmk->blk", s1, psi.hessian(x), s1)
        ito_taylor = (
            0.5 * psi_x * np.einsum("bi,ij,bj->b", h, quad, h)
            + np.einsum("bi,ij,bj->b", h, quad, sg)
            + 0.5 * np.einsum("blk,lk->b", curvature, quad)
        )
        compensator = obs_model.compensator(t, x)

        integrated += rho(
            log_weights,
            generator * dt + noise + ito_taylor + psi_x * compensator * dt,
        )
        current = rho(history.log_weights[k + 1], psi.value(history.x[k + 1]))
        residual[k] = current - start - integrated

    return residual


def zakai_residual_check(
    trace: FilterTrace,
    psi: Union[str, TestFunction],
    obs_path: ObservationPath,
    model: ModelSpec,
    obs_model: LevyObservationModel,
    drift: Optional[DriftFunction] = None,
) -> float:
    """Max |R(t_k)| over the grid checkpoints"""
    return float(
        np.max(
            np.abs(zakai_residual(trace, psi, obs_path, model, obs_model, drift))
        )
    )
