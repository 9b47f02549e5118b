"""Time grids and driving noises: Brownian paths and marked jump streams"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError
from .marks import MarkLaw
from .seeding import SeedSpec

GRID_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k·dt on [0, T]"""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.steps or int(self.steps) < 1:
            raise ConfigurationError(
                f"Time grid needs at least one step, got {self.steps}"
            )
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ConfigurationError(
                f"Time horizon must be positive, got {self.horizon}"
            )
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_step(cls, horizon: float, dt: float) -> "TimeGrid":
        """Grid with step dt; horizon must be a multiple of dt"""
        if dt <= 0:
            raise ConfigurationError(f"Time step must be positive, got {dt}")
        steps = round(horizon / dt)
        if steps < 1 or abs(steps * dt - horizon) > GRID_TOLERANCE * horizon:
            raise ConfigurationError(
                f"Horizon {horizon} is not a multiple of dt={dt}"
            )
        return cls(horizon, steps)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def steps_in(self, width: float) -> int:
        """Number of steps spanning ``width``; it must be a multiple of dt"""
        count = round(width / self.dt)
        if count < 1 or abs(count * self.dt - width) > GRID_TOLERANCE * max(
            width, self.dt
        ):
            raise ConfigurationError(
                f"Width {width:g} is not an integer multiple of dt={self.dt:g}"
            )
        return count

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)

    def cell_of(self, times: np.ndarray) -> np.ndarray:
        """Index k of the cell (t_k, t_{k+1}] containing each time"""
        cells = np.ceil(np.asarray(times) / self.dt - GRID_TOLERANCE) - 1
        return np.clip(cells, 0, self.steps - 1).astype(int)


@dataclass(frozen=True)
class BrownianPath:
    """Increments ΔW[k, i] ~ Normal(0, dt) on a grid"""

    grid: TimeGrid
    increments: np.ndarray

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    def path(self) -> np.ndarray:
        """Cumulative path with W(t_0) = 0"""
        values = np.zeros((self.grid.steps + 1, self.dim))
        np.cumsum(self.increments, axis=0, out=values[1:])
        return values

    def coarsen(self, factor: int) -> "BrownianPath":
        """Sum increments in blocks of ``factor`` steps"""
        steps = self.grid.steps // factor
        blocks = self.increments.reshape(steps, factor, self.dim).sum(axis=1)
        return BrownianPath(TimeGrid(self.grid.horizon, steps), blocks)


@dataclass(frozen=True)
class JumpStream:
    """Marked homogeneous Poisson events on (0, T]"""

    grid: TimeGrid
    times: np.ndarray
    marks: np.ndarray
    base_rate: float
    rate_scale: float
    mark_law: MarkLaw
    uniforms: np.ndarray = field(default=None, compare=False)

    @property
    def intensity(self) -> float:
        """Total event rate rateScale · r"""
        return self.rate_scale * self.base_rate

    @property
    def count(self) -> int:
        return int(self.times.size)

    def cells(self) -> np.ndarray:
        """Grid cell of every event; jumps are applied at the cell end"""
        return self.grid.cell_of(self.times)

    def count_until(self, t: float) -> int:
        """Number of events in (0, t]"""
        return int(np.searchsorted(self.times, t, side="right"))


def sample_brownian(grid: TimeGrid, dim: int, seed: SeedSpec) -> BrownianPath:
    """Sample N×dim Brownian increments, deterministic per seed"""
    if dim < 1:
        raise ConfigurationError(f"Brownian dimension must be ≥ 1, got {dim}")
    rng = seed.generator()
    increments = rng.standard_normal((grid.steps, dim)) * np.sqrt(grid.dt)
    return BrownianPath(grid, increments)


def sample_jump_stream(
    grid: TimeGrid,
    rate: float,
    rate_scale: float,
    mark_law: MarkLaw,
    seed: SeedSpec,
) -> JumpStream:
    """Sample a compound Poisson stream with intensity rate_scale · rate

    Each event also carries an independent Uniform(0, 1) draw, used when
    the stream is thinned by a state-dependent acceptance probability.
    """
    if rate < 0 or not np.isfinite(rate):
        raise ConfigurationError(f"Jump rate must be ≥ 0, got {rate}")
    if rate_scale <= 0 or not np.isfinite(rate_scale):
        raise ConfigurationError(
            f"Rate scale must be positive, got {rate_scale}"
        )

    rng = seed.generator()
    count = int(rng.poisson(rate * rate_scale * grid.horizon))
    # τ = T − U·T lies in (0, T]
    times = np.sort(grid.horizon - rng.uniform(0.0, grid.horizon, count))
    marks = mark_law.sample(rng, count)
    uniforms = rng.uniform(0.0, 1.0, count)
    return JumpStream(
        grid=grid,
        times=times,
        marks=marks,
        base_rate=float(rate),
        rate_scale=float(rate_scale),
        mark_law=mark_law,
        uniforms=uniforms,
    )


def compensated_integral(
    stream: JumpStream,
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> float:
    """Σ_events g(τ, u) − ∫₀ᵀ∫ g(s, u) ν(du) ds for a deterministic g

    ``integrand(t, u)`` must broadcast over array arguments. The time
    integral is the left-point sum over the stream's grid and the mark
    integral is quadrature against the mark law.
    """
    grid = stream.grid
    jumps = 0.0
    if stream.count:
        jumps = float(np.sum(integrand(stream.times, stream.marks)))

    if stream.intensity == 0:
        return jumps

    nodes, weights = stream.mark_law.quadrature()
    times = grid.times[:-1]
    values = np.broadcast_to(
        np.asarray(integrand(times[:, None], nodes[None, :]), dtype=float),
        (times.size, nodes.size),
    )
    compensator = stream.intensity * grid.dt * float(np.sum(values @ weights))
    return jumps - compensator
