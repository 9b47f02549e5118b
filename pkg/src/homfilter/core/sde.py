"""Euler–Maruyama integration of the slow-fast systems and their limits"""

import hashlib
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, DivergenceError, StabilityError
from .fitting import mean_and_se
from .models import LEVY_FAMILY, JumpMeasure, ModelSpec, jump_mean
from .noise import (
    BrownianPath,
    JumpStream,
    TimeGrid,
    sample_brownian,
    sample_jump_stream,
)
from .seeding import Process, SeedSpec

RESOLUTION_FACTOR = 10

DriftFunction = Callable[[np.ndarray], np.ndarray]


def check_resolution(epsilon: float, dt: float) -> None:
    """Fast-scale guard dt ≤ ε/10"""
    if not 0 < epsilon <= 1:
        raise ConfigurationError(f"ε must lie in (0, 1], got {epsilon}")
    if dt > epsilon / RESOLUTION_FACTOR * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt:g} is too coarse for ε={epsilon:g} "
            f"(need dt ≤ ε/{RESOLUTION_FACTOR})"
        )


@dataclass(frozen=True)
class NoiseBundle:
    """One realization of every driving process on a shared grid"""

    grid: TimeGrid
    V: BrownianPath
    W: BrownianPath
    B: BrownianPath
    J1: JumpStream
    J2: JumpStream
    J_lambda: Optional[JumpStream] = None

    def __post_init__(self):
        parts = [self.V, self.W, self.B, self.J1, self.J2]
        if self.J_lambda is not None:
            parts.append(self.J_lambda)
        if any(part.grid != self.grid for part in parts):
            raise ConfigurationError("Noise components use different grids")

    def checksum(self) -> str:
        """Digest of the slow-equation noise (V, B, J1) shared by the
        ε-system and its homogenized limit"""
        digest = hashlib.sha256()
        for array in (
            self.V.increments,
            self.B.increments,
            self.J1.times,
            self.J1.marks,
        ):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()

    @classmethod
    def zero(cls, model: ModelSpec, grid: TimeGrid) -> "NoiseBundle":
        """All increments zero and no jump events"""
        empty = np.empty(0)

        def path(dim):
            return BrownianPath(grid, np.zeros((grid.steps, dim)))

        def stream(measure, scale):
            return JumpStream(
                grid, empty, empty, measure.rate, scale, measure.mark_law,
                empty,
            )

        return cls(
            grid=grid,
            V=path(model.dims["l"]),
            W=path(model.m),
            B=path(model.dims["j"]),
            J1=stream(model.jump1, 1.0),
            J2=stream(model.jump2, 1.0),
        )


def sample_noise(
    model: ModelSpec,
    grid: TimeGrid,
    epsilon: float,
    seed: SeedSpec,
    proposal: Optional[JumpMeasure] = None,
) -> NoiseBundle:
    """Sample every driving process from its own stream path"""
    return NoiseBundle(
        grid=grid,
        V=sample_brownian(grid, model.dims["l"], seed.child(Process.V)),
        W=sample_brownian(grid, model.m, seed.child(Process.W)),
        B=sample_brownian(grid, model.dims["j"], seed.child(Process.B)),
        J1=sample_jump_stream(
            grid,
            model.jump1.rate,
            1.0,
            model.jump1.mark_law,
            seed.child(Process.J1),
        ),
        J2=sample_jump_stream(
            grid,
            model.jump2.rate,
            1.0 / epsilon,
            model.jump2.mark_law,
            seed.child(Process.J2),
        ),
        J_lambda=(
            None
            if proposal is None
            else sample_jump_stream(
                grid,
                proposal.rate,
                1.0,
                proposal.mark_law,
                seed.child(Process.J_LAMBDA),
            )
        ),
    )


@dataclass(frozen=True)
class PathPair:
    """Slow path X and fast path Z (absent for homogenized paths)"""

    grid: TimeGrid
    X: np.ndarray
    Z: Optional[np.ndarray] = None
    noise_checksum: Optional[str] = None

    def __post_init__(self):
        expected = self.grid.steps + 1
        if self.X.shape[0] != expected or (
            self.Z is not None and self.Z.shape[0] != expected
        ):
            raise ConfigurationError(
                f"Path arrays must have {expected} rows on this grid"
            )


class BatchJumps:
    """Jump events of one stream per batch row, grouped by grid cell

    Events of the same row inside one cell are applied in rounds, so each
    jump sees the state left by the previous one.
    """

    def __init__(self, streams: Sequence[JumpStream], steps: int):
        cells, members, times, marks = [], [], [], []
        for row, stream in enumerate(streams):
            cells.append(stream.cells())
            members.append(np.full(stream.count, row, dtype=int))
            times.append(stream.times)
            marks.append(stream.marks)
        batch = max(len(streams), 1)

        cells = np.concatenate(cells) if cells else np.empty(0, dtype=int)
        members = np.concatenate(members) if members else cells
        times = np.concatenate(times) if times else np.empty(0)
        marks = np.concatenate(marks) if marks else np.empty(0)

        keys = cells * batch + members
        order = np.lexsort((times, keys))
        keys = keys[order]
        starts = np.r_[0, np.flatnonzero(np.diff(keys)) + 1]
        sizes = np.diff(np.r_[starts, keys.size])

        self.cells = cells[order]
        self.members = members[order]
        self.marks = marks[order]
        self.rank = np.arange(keys.size) - np.repeat(starts, sizes)
        self.bounds = np.searchsorted(self.cells, np.arange(steps + 1))

    @property
    def count(self) -> int:
        return int(self.cells.size)

    def apply(
        self,
        step: int,
        state: np.ndarray,
        jump: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    ) -> np.ndarray:
        """Add ``jump(rows, current_rows, marks)`` for the events of a cell"""
        lo, hi = self.bounds[step], self.bounds[step + 1]
        if lo == hi:
            return state
        members = self.members[lo:hi]
        marks = self.marks[lo:hi]
        rank = self.rank[lo:hi]
        for level in range(int(rank.max()) + 1):
            pick = rank == level
            rows = members[pick]
            state[rows] += jump(rows, state[rows], marks[pick])
        return state


def _matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    vector = np.broadcast_to(vector, matrix.shape[:1] + matrix.shape[2:])
    return np.einsum("bij,bj->bi", matrix, vector)


def slow_step(
    model: ModelSpec,
    x: np.ndarray,
    drift: np.ndarray,
    dt: float,
    dV: np.ndarray,
    dB: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Continuous part of one slow Euler step plus the ν₁ compensator"""
    step = x + drift * dt + _matvec(model.sigma1(x), dV)
    if model.family == LEVY_FAMILY and dB is not None:
        step = step + _matvec(model.sigma0(x), dB)
    if model.jump1.rate:
        step = step - dt * jump_mean(model.f1, model.jump1, x)
    return step


def fast_step(
    model: ModelSpec,
    x: np.ndarray,
    z: np.ndarray,
    dt: float,
    scale: float,
    dW: np.ndarray,
) -> np.ndarray:
    """Continuous part of one fast Euler step at time scale 1/scale"""
    step = (
        z
        + model.b2(x, z) * (scale * dt)
        + _matvec(model.sigma2(x, z), dW) * np.sqrt(scale)
    )
    if model.jump2.rate:
        step = step - (scale * dt) * jump_mean(model.f2, model.jump2, x, z)
    return step


def _check_finite(step: int, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise DivergenceError(
                f"Non-finite state at step {step}", step=step
            )


def _check_grid(grid: TimeGrid, noise: NoiseBundle) -> None:
    if noise.grid != grid:
        raise ConfigurationError(
            f"Noise grid (T={noise.grid.horizon}, N={noise.grid.steps}) does "
            f"not match the simulation grid (T={grid.horizon}, N={grid.steps})"
        )


def simulate_slow_fast(
    model: ModelSpec, epsilon: float, grid: TimeGrid, noise: NoiseBundle
) -> PathPair:
    """Euler scheme for the coupled slow-fast system at scale ε"""
    check_resolution(epsilon, grid.dt)
    _check_grid(grid, noise)
    dt, scale = grid.dt, 1.0 / epsilon

    X = np.empty((grid.steps + 1, model.n))
    Z = np.empty((grid.steps + 1, model.m))
    x, z = model.x0[None, :].copy(), model.z0[None, :].copy()
    X[0], Z[0] = x[0], z[0]
    jumps1 = BatchJumps([noise.J1], grid.steps)
    jumps2 = BatchJumps([noise.J2], grid.steps)

    for k in range(grid.steps):
        x_next = slow_step(
            model, x, model.b1(x, z), dt, noise.V.increments[k],
            noise.B.increments[k],
        )
        z_next = fast_step(model, x, z, dt, scale, noise.W.increments[k])
        x_next = jumps1.apply(
            k, x_next, lambda rows, cur, u: model.f1(cur, u)
        )
        z_next = jumps2.apply(
            k, z_next, lambda rows, cur, u: model.f2(x[rows], cur, u)
        )
        _check_finite(k + 1, x_next, z_next)
        x, z = x_next, z_next
        X[k + 1], Z[k + 1] = x[0], z[0]

    return PathPair(grid, X, Z, noise.checksum())


def integrate_frozen_fast(
    model: ModelSpec,
    x: np.ndarray,
    z0: np.ndarray,
    increments: np.ndarray,
    jumps: BatchJumps,
    dt: float,
    scale: float = 1.0,
) -> np.ndarray:
    """Batched frozen fast equation; returns states of shape (N+1, B, m)

    ``x`` has shape (B, n), ``z0`` (B, m), ``increments`` (N, B, m).
    """
    steps = increments.shape[0]
    path = np.empty((steps + 1,) + z0.shape)
    z = z0.copy()
    path[0] = z
    for k in range(steps):
        z_next = fast_step(model, x, z, dt, scale, increments[k])
        z_next = jumps.apply(
            k, z_next, lambda rows, cur, u: model.f2(x[rows], cur, u)
        )
        _check_finite(k + 1, z_next)
        z = z_next
        path[k + 1] = z
    return path


def simulate_frozen_fast(
    model: ModelSpec,
    x: np.ndarray,
    z0: np.ndarray,
    W: BrownianPath,
    J2: JumpStream,
) -> np.ndarray:
    """Fast equation with the slow state frozen at x, time scale 1"""
    if J2.grid != W.grid:
        raise ConfigurationError("W and J2 must share one grid")
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))[None, :]
    path = integrate_frozen_fast(
        model,
        x,
        z0,
        W.increments[:, None, :],
        BatchJumps([J2], W.grid.steps),
        W.grid.dt,
    )
    return path[:, 0, :]


def simulate_auxiliary(
    model: ModelSpec,
    epsilon: float,
    delta: float,
    pair: PathPair,
    noise: NoiseBundle,
) -> np.ndarray:
    """Auxiliary fast process Ẑ with X frozen on each δ-cell

    Ẑ is re-anchored to Z at every cell start kδ and driven by the same
    W and J2 as the slow-fast run that produced ``pair``.
    """
    grid = pair.grid
    check_resolution(epsilon, grid.dt)
    _check_grid(grid, noise)
    if pair.Z is None:
        raise ConfigurationError("Auxiliary process needs the fast path Z")
    cell = grid.steps_in(delta)
    dt, scale = grid.dt, 1.0 / epsilon

    Zhat = np.empty_like(pair.Z)
    Zhat[0] = pair.Z[0]
    jumps2 = BatchJumps([noise.J2], grid.steps)
    z = pair.Z[:1].copy()
    frozen = pair.X[:1]

    for k in range(grid.steps):
        if k % cell == 0:
            z = pair.Z[k : k + 1].copy()
            frozen = pair.X[k : k + 1]
        z_next = fast_step(model, frozen, z, dt, scale, noise.W.increments[k])
        z_next = jumps2.apply(
            k,
            z_next,
            lambda rows, cur, u, xs=frozen: model.f2(xs[rows], cur, u),
        )
        _check_finite(k + 1, z_next)
        z = z_next
        Zhat[k + 1] = z[0]

    return Zhat


def simulate_homogenized(
    model: ModelSpec, drift: DriftFunction, grid: TimeGrid, noise: NoiseBundle
) -> PathPair:
    """Euler path of the averaged equation on the shared slow noise"""
    _check_grid(grid, noise)
    dt = grid.dt
    X = np.empty((grid.steps + 1, model.n))
    x = model.x0[None, :].copy()
    X[0] = x[0]
    jumps1 = BatchJumps([noise.J1], grid.steps)

    for k in range(grid.steps):
        x_next = slow_step(
            model, x, drift(x), dt, noise.V.increments[k],
            noise.B.increments[k],
        )
        x_next = jumps1.apply(
            k, x_next, lambda rows, cur, u: model.f1(cur, u)
        )
        _check_finite(k + 1, x_next)
        x = x_next
        X[k + 1] = x[0]

    return PathPair(grid, X, None, noise.checksum())


def sup_squared_distance(first: np.ndarray, second: np.ndarray) -> float:
    """sup_k |first_k − second_k|²"""
    return float(np.max(np.sum((first - second) ** 2, axis=-1)))


def strong_error(
    eps_paths: Sequence[PathPair], homogenized_paths: Sequence[PathPair]
) -> Tuple[float, float]:
    """Monte Carlo E sup_t |Xᵉ − X⁰|² with its standard error"""
    if len(eps_paths) != len(homogenized_paths):
        raise ConfigurationError(
            f"Replication counts differ: {len(eps_paths)} ε-paths vs "
            f"{len(homogenized_paths)} homogenized paths"
        )
    if not eps_paths:
        raise ConfigurationError("strong_error needs at least one replication")
    errors: List[float] = []
    for eps_path, hom_path in zip(eps_paths, homogenized_paths):
        if eps_path.grid != hom_path.grid:
            raise ConfigurationError("Coupled paths use different grids")
        errors.append(sup_squared_distance(eps_path.X, hom_path.X))
    return mean_and_se(errors)


def rate_profile(epsilon: float, delta: float) -> float:
    """Shape ε/δ + (δ+1)δ + (δ+1)δ²/ε of the strong-error bound"""
    return (
        epsilon / delta + (delta + 1) * delta + (delta + 1) * delta**2 / epsilon
    )


def aux_error_bound(model: ModelSpec, epsilon: float, delta: float) -> float:
    """Bound on sup_s E|Zᵉ_s − Ẑᵉ_s|² from the declared constants"""
    c = model.constants
    try:
        fast = c["L_b2"] + 2 * c["L_sigma2"] ** 2 + 2 * c["int_L2_nu2"]
        slow = c["L_b1_sigma1_f1"]
    except KeyError as e:
        raise ConfigurationError(f"Missing declared constant {e}")
    return fast / epsilon * 3 * (delta + 1) * slow * delta**2
