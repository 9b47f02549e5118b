"""One-dimensional finite-difference solver for the homogenized Zakai equation

Lie splitting per step: observed jump events, the observation half
q(1 + ȟΔV̌) − ∂ₓ(σ̌₁q)ΔV̌, the jump compensator, then the Fokker–Planck
half in conservative flux form.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from ..ui.console import print_warning
from .exceptions import ConfigurationError, ModelError, UnderflowError
from .functions import DEFAULT_TEST_FUNCTIONS, TestFunction, get_function
from .models import ModelSpec
from .observation import LevyObservationModel, ObservationPath
from .particle import DriftFunction, FilterTrace, observed_events

MASS_FLOOR = 1e-300
BOUNDARY_MASS_LIMIT = 1e-6
BOUNDARY_NODES = 5
CFL_LIMIT = 0.5


@dataclass
class DensityGrid:
    """Unnormalized density q on cell-centred nodes of [lo, hi]"""

    x: np.ndarray
    q: np.ndarray
    t: float = 0.0
    clipped: int = 0
    node_steps: int = 0

    @classmethod
    def initial(
        cls,
        lo: float,
        hi: float,
        cells: int,
        x0: float,
        std: Optional[float] = None,
    ) -> "DensityGrid":
        """Point mass at x0 (nearest cell), or a Gaussian of width ``std``"""
        if cells < 3 or not hi > lo:
            raise ConfigurationError(
                f"Density grid needs ≥ 3 cells on a non-empty range, "
                f"got [{lo}, {hi}] with {cells}"
            )
        dx = (hi - lo) / cells
        x = lo + (np.arange(cells) + 0.5) * dx
        if not lo <= x0 <= hi:
            raise ConfigurationError(f"Initial state {x0} outside [{lo}, {hi}]")
        if not std:
            q = np.zeros(cells)
            q[int(np.argmin(np.abs(x - x0)))] = 1.0 / dx
        else:
            q = np.exp(-0.5 * ((x - x0) / std) ** 2)
            q /= q.sum() * dx
        return cls(x, q)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def cells(self) -> int:
        return int(self.x.size)

    def mass(self) -> float:
        """Finite-volume mass Δx·Σq, conserved by the flux form"""
        return float(self.q.sum() * self.dx)

    def boundary_fraction(self) -> float:
        total = self.q.sum()
        if total <= 0:
            return 0.0
        edge = self.q[:BOUNDARY_NODES].sum() + self.q[-BOUNDARY_NODES:].sum()
        return float(edge / total)

    def copy(self) -> "DensityGrid":
        return DensityGrid(
            self.x.copy(), self.q.copy(), self.t, self.clipped, self.node_steps
        )

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "q"])
            for xi, qi in zip(self.x, self.q):
                writer.writerow([f"{xi:.17g}", f"{qi:.17g}"])
        return path


def _check_oracle_model(model: ModelSpec, obs_model: LevyObservationModel):
    if model.n != 1 or obs_model.d != 1:
        raise ConfigurationError("The FD oracle is one-dimensional")
    if model.jump1.rate and model.params.get("c1", 0.0):
        raise ConfigurationError(
            "The FD oracle has no signal-jump term; set c1 = 0 or r1 = 0"
        )


def _flux_coefficients(state: DensityGrid, b: np.ndarray, a: np.ndarray):
    """Face flux F_{i+½} = lower_i q_i + upper_i q_{i+1}"""
    dx = state.dx
    face_drift = 0.5 * (b[:-1] + b[1:])
    lower = 0.5 * face_drift + 0.5 * a[:-1] / dx
    upper = 0.5 * face_drift - 0.5 * a[1:] / dx
    return lower, upper


def _apply_operator(q, lower, upper, dx) -> np.ndarray:
    flux = lower * q[:-1] + upper * q[1:]
    out = np.zeros_like(q)
    out[:-1] -= flux / dx
    out[1:] += flux / dx
    return out


def _fokker_planck(
    state: DensityGrid,
    drift: np.ndarray,
    diffusion: np.ndarray,
    dt: float,
    implicit: bool,
) -> np.ndarray:
    dx = state.dx
    lower, upper = _flux_coefficients(state, drift, diffusion)
    if not implicit:
        courant = dt * float(np.max(diffusion)) / dx**2
        if courant > CFL_LIMIT:
            raise ConfigurationError(
                f"Explicit FD step violates the CFL limit: "
                f"dt·a/Δx² = {courant:.3g} > {CFL_LIMIT}"
            )
        return state.q + dt * _apply_operator(state.q, lower, upper, dx)

    # (I − dt·A) q' = q with zero-flux boundaries
    cells = state.cells
    banded = np.zeros((3, cells))
    banded[0, 1:] = dt * upper / dx
    banded[2, :-1] = -dt * lower / dx
    diagonal = np.ones(cells)
    diagonal[:-1] += dt * lower / dx
    diagonal[1:] -= dt * upper / dx
    banded[1] = diagonal
    return solve_banded((1, 1), banded, state.q)


def zakai_fd_step(
    state: DensityGrid,
    model: ModelSpec,
    obs_model: LevyObservationModel,
    drift: DriftFunction,
    dV: float,
    dt: float,
    implicit: bool = True,
) -> DensityGrid:
    """Advance q by one observation increment ΔV̌ (no jump events)"""
    _check_oracle_model(model, obs_model)
    x = state.x[:, None]
    q = state.q

    h = obs_model.h(x, 1)[:, 0]
    s1 = model.sigma1(x)[:, 0, 0]
    q = q * (1.0 + h * dV) - np.gradient(s1 * q, state.dx) * dV
    negative = int(np.count_nonzero(q < 0))
    q = np.maximum(q, 0.0)

    q = q * np.exp(dt * obs_model.compensator(state.t, x))

    moved = DensityGrid(state.x, q, state.t)
    q = _fokker_planck(
        moved,
        np.asarray(drift(x), dtype=float)[:, 0],
        model.diffusion_trace(x)[:, 0, 0],
        dt,
        implicit,
    )
    negative += int(np.count_nonzero(q < 0))
    q = np.maximum(q, 0.0)

    result = DensityGrid(
        state.x,
        q,
        state.t + dt,
        state.clipped + negative,
        state.node_steps + state.cells,
    )
    if not result.q.sum() * result.dx >= MASS_FLOOR:
        raise UnderflowError(f"Density mass collapsed at t={result.t:g}")
    return result


def zakai_fd_jump_update(
    state: DensityGrid,
    tau: float,
    mark: float,
    obs_model: LevyObservationModel,
) -> DensityGrid:
    """q(x) ← q(x)·λ(τ, x, u) at an observed U₃ event"""
    intensity = np.asarray(
        obs_model.intensity(tau, state.x[:, None], mark), dtype=float
    ).reshape(-1)
    if not np.all(np.isfinite(intensity)) or np.any(intensity <= 0):
        raise ModelError(
            f"Intensity non-positive on the density grid at τ={tau:g}"
        )
    return DensityGrid(
        state.x,
        state.q * intensity,
        state.t,
        state.clipped,
        state.node_steps,
    )


def fd_filter_estimate(
    state: DensityGrid, fn: Union[str, TestFunction]
) -> float:
    """∫φq / ∫q by the trapezoid rule"""
    fn = fn if isinstance(fn, TestFunction) else get_function(fn)
    total = trapezoid(state.q, state.x)
    if not total > MASS_FLOOR:
        raise UnderflowError(f"Zero density mass at t={state.t:g}")
    return float(trapezoid(fn(state.x[:, None]) * state.q, state.x) / total)


@dataclass
class FDRun:
    trace: FilterTrace
    state: DensityGrid
    snapshots: List[Path] = field(default_factory=list)

    @property
    def clipped_fraction(self) -> float:
        if not self.state.node_steps:
            return 0.0
        return self.state.clipped / self.state.node_steps


def run_fd_filter(
    obs_path: ObservationPath,
    model: ModelSpec,
    obs_model: LevyObservationModel,
    drift: DriftFunction,
    *,
    lo: float = -6.0,
    hi: float = 6.0,
    cells: int = 400,
    functions: Sequence[Union[str, TestFunction]] = DEFAULT_TEST_FUNCTIONS,
    implicit: bool = True,
    initial_std: Optional[float] = None,
    snapshot_times: Sequence[float] = (),
    snapshot_dir: Optional[Path] = None,
) -> FDRun:
    """Solve the homogenized Zakai equation along a whole observation path"""
    _check_oracle_model(model, obs_model)
    grid = obs_path.grid
    functions = tuple(
        f if isinstance(f, TestFunction) else get_function(f)
        for f in functions
    )
    snapshot_steps: Dict[int, float] = {
        grid.steps_in(t): t for t in snapshot_times
    }
    if snapshot_steps and snapshot_dir is None:
        raise ConfigurationError("Density snapshots need an output directory")

    state = DensityGrid.initial(lo, hi, cells, float(model.x0[0]), initial_std)
    estimates = np.empty((grid.steps + 1, len(functions)))
    mass = np.empty(grid.steps + 1)
    snapshots: List[Path] = []
    by_cell = observed_events(obs_path, obs_model)
    worst_boundary = 0.0

    def record(k: int) -> None:
        nonlocal worst_boundary
        for j, fn in enumerate(functions):
            estimates[k, j] = fd_filter_estimate(state, fn)
        mass[k] = trapezoid(state.q, state.x)
        worst_boundary = max(worst_boundary, state.boundary_fraction())
        if k in snapshot_steps:
            snapshots.append(
                state.to_csv(
                    Path(snapshot_dir) / f"density_t{snapshot_steps[k]:g}.csv"
                )
            )

    record(0)
    for k in range(grid.steps):
        for tau, u in by_cell.get(k, ()):
            state = zakai_fd_jump_update(state, tau, u, obs_model)
        state = zakai_fd_step(
            state,
            model,
            obs_model,
            drift,
            float(obs_path.increments[k, 0]),
            grid.dt,
            implicit,
        )
        state.t = float(grid.times[k + 1])
        record(k + 1)

    if worst_boundary > BOUNDARY_MASS_LIMIT:
        print_warning(
            f"FD oracle: boundary nodes carry {worst_boundary:.2e} of the mass; "
            f"widen [{lo:g}, {hi:g}]"
        )
    run = FDRun(
        trace=FilterTrace(
            times=grid.times,
            function_names=tuple(f.name for f in functions),
            estimates=estimates,
            rho1=mass,
            ess=np.full(grid.steps + 1, np.nan),
            mode="fd",
        ),
        state=state,
        snapshots=snapshots,
    )
    if state.clipped:
        print_warning(
            f"FD oracle: clipped {state.clipped} negative node values "
            f"({run.clipped_fraction:.2e} of node-steps)"
        )
    return run
