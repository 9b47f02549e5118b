"""Observation models, observation paths and Girsanov weights"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from .exceptions import ConfigurationError, ModelError
from .marks import MarkLaw, parse_mark_law
from .models import JumpMeasure
from .noise import BrownianPath, JumpStream, TimeGrid

IDENTITY_TOLERANCE = 1e-12
PSD_TOLERANCE = 1e-10
CHECK_POINTS = np.linspace(-20.0, 20.0, 401)


@dataclass(frozen=True)
class ObservationFunction:
    """Registered h: ℝⁿ → ℝ with declared sup-norm bound"""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    bound: float

    def __call__(self, x: np.ndarray, d: int = 1) -> np.ndarray:
        """Values of shape (B, d), the same function in every component"""
        values = self.fn(np.atleast_2d(x))
        return np.repeat(values[:, None], d, axis=1)


def observation_function(
    name: str, scale: float = 0.5, radius: float = 5.0
) -> ObservationFunction:
    """Build h from the registry: zero, constant, tanh, sin, linear"""
    if name == "zero":
        return ObservationFunction("zero", lambda x: np.zeros(x.shape[0]), 0.0)
    if name == "constant":
        return ObservationFunction(
            "constant", lambda x: np.full(x.shape[0], scale), abs(scale)
        )
    if name == "tanh":
        return ObservationFunction(
            "tanh", lambda x: scale * np.tanh(x[:, 0]), abs(scale)
        )
    if name == "sin":
        return ObservationFunction(
            "sin", lambda x: scale * np.sin(x[:, 0]), abs(scale)
        )
    if name == "linear":
        if radius <= 0:
            raise ConfigurationError("h_radius must be positive")
        return ObservationFunction(
            "linear",
            lambda x: scale * np.clip(x[:, 0], -radius, radius),
            abs(scale) * radius,
        )
    raise ConfigurationError(
        f"Unknown observation function '{name}', expected one of "
        f"zero, constant, tanh, sin, linear"
    )


def _check_bound(h: ObservationFunction, n: int) -> None:
    points = np.zeros((CHECK_POINTS.size, n))
    points[:, 0] = CHECK_POINTS
    norms = np.abs(h.fn(points))
    if np.any(norms > h.bound * (1 + 1e-12) + 1e-15):
        raise ConfigurationError(
            f"Observation function '{h.name}' exceeds its declared bound "
            f"{h.bound:g} (max {norms.max():g})"
        )


@dataclass
class SensorObservationModel:
    """dY = h(X) dt + σ₃ dV + σ₄ dB with σ₃σ₃′ + σ₄σ₄′ = I"""

    h: ObservationFunction
    sigma3: np.ndarray
    sigma4: np.ndarray
    n: int = 1

    def __post_init__(self):
        self.sigma3 = np.atleast_2d(np.asarray(self.sigma3, dtype=float))
        self.sigma4 = np.atleast_2d(np.asarray(self.sigma4, dtype=float))
        if self.sigma3.shape[0] != self.sigma4.shape[0]:
            raise ConfigurationError("σ3 and σ4 need the same number of rows")
        gram = self.sigma3 @ self.sigma3.T + self.sigma4 @ self.sigma4.T
        if np.max(np.abs(gram - np.eye(self.d))) > IDENTITY_TOLERANCE:
            raise ConfigurationError(
                "Observation noise must satisfy σ3σ3′ + σ4σ4′ = I"
            )
        _check_bound(self.h, self.n)
        self.conditional_root = _psd_root(
            np.eye(self.sigma3.shape[1]) - self.sigma3.T @ self.sigma3
        )

    @property
    def d(self) -> int:
        return self.sigma3.shape[0]

    @property
    def correlated(self) -> bool:
        return bool(np.any(self.sigma3 != 0))


def _psd_root(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root with eigenvalues clamped at 0"""
    eigenvalues, vectors = linalg.eigh(matrix)
    if eigenvalues.min() < -PSD_TOLERANCE:
        raise ConfigurationError(
            f"I − σ3′σ3 is not positive semi-definite "
            f"(smallest eigenvalue {eigenvalues.min():.3g})"
        )
    root = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (vectors * root) @ vectors.T


def sensor_observation(
    h: ObservationFunction, correlation: float
) -> SensorObservationModel:
    """Scalar sensor model with σ3 = ρ and σ4 = √(1 − ρ²)"""
    if not -1 <= correlation <= 1:
        raise ConfigurationError(
            f"Observation correlation must lie in [-1, 1], got {correlation}"
        )
    return SensorObservationModel(
        h=h,
        sigma3=[[correlation]],
        sigma4=[[np.sqrt(1 - correlation**2)]],
    )


@dataclass(frozen=True)
class Intensity:
    """λ(t, x, u) ∈ (0, 1] with lower bound Ľ(u) ≥ ľ"""

    name: str
    fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray] = field(
        repr=False, compare=False
    )
    lower: Callable[[np.ndarray], np.ndarray] = field(
        repr=False, compare=False
    )
    floor: float
    depends_on_x: bool = True

    def __call__(self, t: float, x: np.ndarray, u) -> np.ndarray:
        """Broadcasts x[:, :1] against u"""
        return self.fn(t, np.atleast_2d(x)[:, :1], np.asarray(u, dtype=float))


def intensity_function(
    name: str, level: float = 0.5, amplitude: float = 0.3
) -> Intensity:
    """Build λ from the registry: constant, tanh"""
    if name == "constant":
        return Intensity(
            "constant",
            lambda t, x, u: np.full(np.broadcast(x, u).shape, level),
            lambda u: np.full(np.shape(u), level),
            level,
            depends_on_x=False,
        )
    if name == "tanh":
        return Intensity(
            "tanh",
            lambda t, x, u: level + amplitude * np.tanh(x) * np.tanh(u),
            lambda u: level - abs(amplitude) * np.abs(np.tanh(u)),
            level - abs(amplitude),
            depends_on_x=amplitude != 0,
        )
    raise ConfigurationError(
        f"Unknown intensity '{name}', expected one of constant, tanh"
    )


def check_intensity(values: np.ndarray) -> np.ndarray:
    """Raise ModelError unless every λ lies in (0, 1]"""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)) or np.any(values <= 0) or np.any(
        values > 1
    ):
        raise ModelError(
            f"Intensity λ left (0, 1]: range "
            f"[{np.nanmin(values):.4g}, {np.nanmax(values):.4g}]"
        )
    return values


@dataclass
class LevyObservationModel:
    """dY̌ = ȟ(X̌) dt + dV + a₃u Ñ_λ on U₃ + g₃u N_λ outside U₃

    U₃ = {|u| ≤ radius}; proposals arrive at rate ν₃ and are accepted
    with probability λ(t, x, u).
    """

    h: ObservationFunction
    intensity: Intensity
    measure: JumpMeasure
    jump_scale: float = 0.5
    outside_scale: float = 0.0
    radius: float = np.inf
    n: int = 1

    def __post_init__(self):
        _check_bound(self.h, self.n)
        if not self.intensity.floor > 0:
            raise ConfigurationError(
                f"Intensity floor ľ must be positive, got "
                f"{self.intensity.floor:g}"
            )
        if self.radius <= 0:
            raise ConfigurationError("u3_radius must be positive")
        if np.isfinite(self.radius) and self.outside_scale != 0:
            if abs(self.outside_scale) < abs(self.jump_scale):
                raise ConfigurationError(
                    "Jumps outside U3 must be at least as large as those "
                    "inside (|g3| ≥ |a3|) to keep marks recoverable"
                )
        self._check_intensity_bounds()

    @property
    def d(self) -> int:
        return 1

    @property
    def marks_observable(self) -> bool:
        return self.jump_scale != 0 or self.measure.rate == 0

    def _check_intensity_bounds(self) -> None:
        nodes, _ = self.measure.mark_law.quadrature()
        marks = np.concatenate([nodes, np.linspace(-3.0, 3.0, 61)])
        x = np.zeros((CHECK_POINTS.size, self.n))
        x[:, 0] = CHECK_POINTS
        values = self.intensity(0.0, x, marks[None, :])
        lower = self.intensity.lower(marks)[None, :]
        if (
            np.any(values > 1)
            or np.any(lower > values + 1e-12)
            or np.any(lower < self.intensity.floor - 1e-12)
        ):
            raise ConfigurationError(
                f"Intensity '{self.intensity.name}' violates "
                f"ľ ≤ Ľ(u) ≤ λ(t, x, u) ≤ 1 on sampled points"
            )

    def in_u3(self, marks: np.ndarray) -> np.ndarray:
        return np.abs(marks) <= self.radius

    def jump_size(self, marks: np.ndarray) -> np.ndarray:
        """f̌₃ = a₃u on U₃, ǧ₃ = g₃u outside"""
        marks = np.asarray(marks, dtype=float)
        return np.where(
            self.in_u3(marks),
            self.jump_scale * marks,
            self.outside_scale * marks,
        )

    def recover_marks(self, jumps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Marks and U₃ membership reconstructed from jump sizes"""
        if self.jump_scale == 0:
            raise ConfigurationError(
                "Marks are not recoverable when f3 vanishes (jump_scale = 0)"
            )
        jumps = np.asarray(jumps, dtype=float)
        on_u3 = np.abs(jumps) <= abs(self.jump_scale) * self.radius
        marks = np.where(
            on_u3,
            jumps / self.jump_scale,
            jumps / (self.outside_scale or 1.0),
        )
        return marks, on_u3

    def _restricted(self, values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        _, weights = self.measure.mark_law.quadrature()
        mask = self.in_u3(nodes)
        return self.measure.rate * (values * mask) @ weights

    def compensator(self, t: float, x: np.ndarray) -> np.ndarray:
        """∫_{U₃} (1 − λ(t, x, u)) ν₃(du) per sample, shape (B,)"""
        x = np.atleast_2d(x)
        if self.measure.rate == 0:
            return np.zeros(x.shape[0])
        nodes, _ = self.measure.mark_law.quadrature()
        values = check_intensity(self.intensity(t, x, nodes[None, :]))
        return self._restricted(1.0 - values, nodes)

    def jump_drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """∫_{U₃} f̌₃(u) λ(t, x, u) ν₃(du) per sample, shape (B,)"""
        x = np.atleast_2d(x)
        if self.measure.rate == 0 or self.jump_scale == 0:
            return np.zeros(x.shape[0])
        nodes, _ = self.measure.mark_law.quadrature()
        values = check_intensity(self.intensity(t, x, nodes[None, :]))
        return self._restricted(self.jump_scale * nodes * values, nodes)

    def f3_second_moment(self) -> float:
        """∫_{U₃} |f̌₃(u)|² ν₃(du)"""
        nodes, weights = self.measure.mark_law.quadrature()
        return float(
            self._restricted((self.jump_scale * nodes) ** 2, nodes)
        )


def levy_observation(
    h: ObservationFunction,
    intensity: Intensity,
    rate: float,
    mark_law: str = "uniform",
    jump_scale: float = 0.5,
    outside_scale: float = 0.0,
    radius: float = np.inf,
) -> LevyObservationModel:
    return LevyObservationModel(
        h=h,
        intensity=intensity,
        measure=JumpMeasure(rate, parse_mark_law(mark_law)),
        jump_scale=jump_scale,
        outside_scale=outside_scale,
        radius=radius,
    )


@dataclass(frozen=True)
class ObservationPath:
    """Observation increments on a grid

    ``increments`` is the continuous part: ΔY for the sensor model, ΔV̌ =
    ȟ dt + ΔV for the Lévy model. ``drift`` holds the jump compensator
    −dt∫f̌₃λν₃ and the event arrays hold accepted jumps, applied at the
    end of their grid cell.
    """

    grid: TimeGrid
    increments: np.ndarray
    drift: Optional[np.ndarray] = None
    event_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    event_marks: np.ndarray = field(default_factory=lambda: np.empty(0))
    event_jumps: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def d(self) -> int:
        return self.increments.shape[1]

    @property
    def event_count(self) -> int:
        return int(self.event_times.size)

    def event_cells(self) -> np.ndarray:
        return self.grid.cell_of(self.event_times)

    def values(self) -> np.ndarray:
        """Y at the grid times, Y₀ = 0"""
        steps = self.increments.copy()
        if self.drift is not None:
            steps += self.drift
        if self.event_count:
            np.add.at(steps[:, 0], self.event_cells(), self.event_jumps)
        values = np.zeros((self.grid.steps + 1, self.d))
        np.cumsum(steps, axis=0, out=values[1:])
        return values

    def coarsen(self, factor: int) -> "ObservationPath":
        """Sum increments over blocks of ``factor`` steps"""
        steps = self.grid.steps // factor
        if steps * factor != self.grid.steps:
            raise ConfigurationError(
                f"Cannot coarsen {self.grid.steps} steps by {factor}"
            )

        def block(array):
            if array is None:
                return None
            return array.reshape(steps, factor, -1).sum(axis=1)

        return ObservationPath(
            grid=TimeGrid(self.grid.horizon, steps),
            increments=block(self.increments),
            drift=block(self.drift),
            event_times=self.event_times,
            event_marks=self.event_marks,
            event_jumps=self.event_jumps,
        )


def _path_values(X) -> np.ndarray:
    return X.X if hasattr(X, "X") else np.asarray(X)


def simulate_observation_sensor(
    X,
    V: BrownianPath,
    B: BrownianPath,
    obs_model: SensorObservationModel,
    grid: TimeGrid,
) -> ObservationPath:
    """ΔY_k = h(X_k) dt + σ₃ΔV_k + σ₄ΔB_k"""
    X = _path_values(X)
    if V.grid != grid or B.grid != grid or X.shape[0] != grid.steps + 1:
        raise ConfigurationError("Observation inputs use different grids")
    drift = obs_model.h(X[:-1], obs_model.d) * grid.dt
    increments = (
        drift
        + V.increments @ obs_model.sigma3.T
        + B.increments @ obs_model.sigma4.T
    )
    return ObservationPath(grid, increments)


def simulate_observation_levy(
    X,
    V: BrownianPath,
    proposals: JumpStream,
    obs_model: LevyObservationModel,
    grid: TimeGrid,
) -> ObservationPath:
    """Continuous part ΔV̌ plus λ-thinned marked jumps

    A proposal at τ in cell k is accepted when its uniform draw falls
    below λ(τ, X_k, u).
    """
    X = _path_values(X)
    if V.grid != grid or proposals.grid != grid:
        raise ConfigurationError("Observation inputs use different grids")
    if X.shape[0] != grid.steps + 1:
        raise ConfigurationError("Signal path does not match the grid")

    dt = grid.dt
    increments = obs_model.h(X[:-1], 1) * dt + V.increments[:, :1]
    drift = np.zeros_like(increments)
    if obs_model.measure.rate and obs_model.jump_scale:
        if obs_model.intensity.depends_on_x:
            for k, t in enumerate(grid.times[:-1]):
                drift[k, 0] = -dt * obs_model.jump_drift(t, X[k : k + 1])[0]
        else:
            drift[:, 0] = -dt * obs_model.jump_drift(0.0, X[:1])[0]

    times = np.empty(0)
    marks = np.empty(0)
    if proposals.count:
        cells = proposals.cells()
        acceptance = check_intensity(
            np.array(
                [
                    obs_model.intensity(tau, X[k : k + 1], u).item()
                    for tau, k, u in zip(proposals.times, cells, proposals.marks)
                ]
            )
        )
        accepted = proposals.uniforms < acceptance
        jumps = obs_model.jump_size(proposals.marks[accepted])
        visible = jumps != 0
        times = proposals.times[accepted][visible]
        marks = proposals.marks[accepted][visible]
    return ObservationPath(
        grid,
        increments,
        drift,
        event_times=times,
        event_marks=marks,
        event_jumps=obs_model.jump_size(marks),
    )


def girsanov_weight_sensor(
    X, obs_path: ObservationPath, h: ObservationFunction
) -> np.ndarray:
    """log γ on the grid: Σ h(X_k)·ΔY_k − ½ Σ |h(X_k)|² dt"""
    X = _path_values(X)
    if X.shape[0] != obs_path.grid.steps + 1:
        raise ConfigurationError("Signal and observation grids differ")
    values = h(X[:-1], obs_path.d)
    steps = np.sum(values * obs_path.increments, axis=1) - 0.5 * np.sum(
        values**2, axis=1
    ) * obs_path.grid.dt
    return np.concatenate([[0.0], np.cumsum(steps)])


def _event_log_intensity(
    X: np.ndarray, obs_path: ObservationPath, obs_model: LevyObservationModel
) -> Dict[int, float]:
    """Σ log λ(τ, X_k, u) over U₃ events, keyed by cell"""
    totals: Dict[int, float] = {}
    if not obs_path.event_count:
        return totals
    marks, on_u3 = obs_model.recover_marks(obs_path.event_jumps)
    for tau, k, u, inside in zip(
        obs_path.event_times, obs_path.event_cells(), marks, on_u3
    ):
        if not inside:
            continue
        value = check_intensity(obs_model.intensity(tau, X[k : k + 1], u))
        totals[k] = totals.get(k, 0.0) + float(np.log(value).item())
    return totals


def likelihood_levy(
    X, obs_path: ObservationPath, obs_model: LevyObservationModel
) -> np.ndarray:
    """Closed-form log λᵉ on the grid

    Σ ȟ(X_k)ΔV̌_k − ½Σ ȟ² dt + Σ_events log λ + Σ dt ∫_{U₃}(1 − λ) ν₃.
    """
    X = _path_values(X)
    grid = obs_path.grid
    if X.shape[0] != grid.steps + 1:
        raise ConfigurationError("Signal and observation grids differ")
    dt = grid.dt
    values = obs_model.h(X[:-1], 1)[:, 0]
    steps = values * obs_path.increments[:, 0] - 0.5 * values**2 * dt
    if obs_model.measure.rate:
        steps += dt * np.array(
            [
                obs_model.compensator(t, X[k : k + 1])[0]
                for k, t in enumerate(grid.times[:-1])
            ]
        )
    for k, total in _event_log_intensity(X, obs_path, obs_model).items():
        steps[k] += total
    return np.concatenate([[0.0], np.cumsum(steps)])


def likelihood_levy_euler(
    X, obs_path: ObservationPath, obs_model: LevyObservationModel
) -> np.ndarray:
    """log λᵉ from the Euler scheme of its SDE

    λ_{k+1} = λ_k (1 + ȟ(X_k)ΔV̌_k + dt∫_{U₃}(1−λ)ν₃) ∏_events λ(τ, X_k, u)
    """
    X = _path_values(X)
    grid = obs_path.grid
    dt = grid.dt
    values = obs_model.h(X[:-1], 1)[:, 0]
    factors = 1.0 + values * obs_path.increments[:, 0]
    if obs_model.measure.rate:
        factors += dt * np.array(
            [
                obs_model.compensator(t, X[k : k + 1])[0]
                for k, t in enumerate(grid.times[:-1])
            ]
        )
    if np.any(factors <= 0):
        raise ModelError(
            "Euler likelihood factor became non-positive; refine dt"
        )
    steps = np.log(factors)
    for k, total in _event_log_intensity(X, obs_path, obs_model).items():
        steps[k] += total
    return np.concatenate([[0.0], np.cumsum(steps)])


def kalman_bucy_mean(
    obs_path: ObservationPath,
    gain: float,
    diffusion: float,
    x0: float,
    variance0: float = 0.0,
    correlation: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Kalman–Bucy filter for dX = σ dV, dY = aX dt + ρ dV + √(1 − ρ²) dB

    Returns the conditional mean and variance on the grid, integrated by
    Euler steps of dm = K (dY − a m dt), dP = (σ² − K²) dt with gain
    K = P a + σρ.
    """
    dt = obs_path.grid.dt
    steps = obs_path.grid.steps
    mean = np.empty(steps + 1)
    variance = np.empty(steps + 1)
    mean[0], variance[0] = x0, variance0
    for k in range(steps):
        m, p = mean[k], variance[k]
        kalman = p * gain + diffusion * correlation
        innovation = obs_path.increments[k, 0] - gain * m * dt
        mean[k + 1] = m + kalman * innovation
        variance[k + 1] = p + (diffusion**2 - kalman**2) * dt
    return mean, variance
