"""Invariant-measure sampling and the averaged drift b̄₁"""

import csv
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..ui.console import print_warning
from .events import EventType, events
from .exceptions import ConfigurationError
from .models import ModelSpec, verify_dissipativity
from .noise import TimeGrid, sample_brownian, sample_jump_stream
from .sde import BatchJumps, integrate_frozen_fast
from .seeding import Process, SeedSpec
from .workers import ordered_map

INTERPOLATION_ORDERS = ("nearest", "multilinear")
DRIFT_SOURCES = ("auto", "oracle", "estimate")


@dataclass(frozen=True)
class EstimatorConfig:
    """Sampling settings for the frozen fast process

    ``burn_in`` defaults to 10/M and ``thinning`` to one sample per
    1/(M·dt) steps, M being the dissipativity margin.
    """

    horizon: float = 50.0
    dt: float = 0.01
    chains: int = 16
    burn_in: Optional[float] = None
    thinning: Optional[int] = None
    min_samples: int = 100

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ConfigurationError("Estimator horizon and dt must be > 0")
        if self.chains < 2:
            raise ConfigurationError(
                "Estimator needs at least 2 chains for a standard error"
            )
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigurationError("Burn-in must be ≥ 0")
        if self.thinning is not None and self.thinning < 1:
            raise ConfigurationError("Thinning must be ≥ 1 step")


@dataclass(frozen=True)
class InvariantSample:
    """Post-burn-in fast states, shape (draws, chains, m)"""

    x: np.ndarray
    samples: np.ndarray
    burn_in: float
    thinning: int

    @property
    def count(self) -> int:
        return int(self.samples.shape[0] * self.samples.shape[1])

    @property
    def chains(self) -> int:
        return int(self.samples.shape[1])

    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1, self.samples.shape[-1])

    def mean(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sample mean and batch-means standard error across chains"""
        return _batch_means(self.samples)


def _batch_means(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    per_chain = values.mean(axis=0)
    se = per_chain.std(axis=0, ddof=1) / np.sqrt(per_chain.shape[0])
    return per_chain.mean(axis=0), se


def _mixing_defaults(
    model: ModelSpec, estimator: EstimatorConfig
) -> Tuple[float, int]:
    burn_in, thinning = estimator.burn_in, estimator.thinning
    if burn_in is None or thinning is None:
        margin = verify_dissipativity(model)
        if margin <= 0:
            raise ConfigurationError(
                f"Model '{model.name}' is not dissipative (M = {margin:g}); "
                f"set averaging.burn_in and averaging.thinning explicitly"
            )
        if burn_in is None:
            burn_in = 10.0 / margin
        if thinning is None:
            thinning = max(1, int(round(1.0 / (margin * estimator.dt))))
    return burn_in, thinning


def estimate_invariant(
    model: ModelSpec,
    x: np.ndarray,
    estimator: EstimatorConfig,
    seed: SeedSpec,
    z0: Optional[np.ndarray] = None,
) -> InvariantSample:
    """Sample the invariant law of the frozen fast process at x"""
    burn_in, thinning = _mixing_defaults(model, estimator)
    dt = estimator.dt
    burn_steps = int(np.ceil(burn_in / dt - 1e-9))
    steps = burn_steps + max(1, int(round(estimator.horizon / dt)))
    grid = TimeGrid(steps * dt, steps)

    chains = estimator.chains
    x = np.atleast_1d(np.asarray(x, dtype=float))
    start = model.z0 if z0 is None else np.atleast_1d(z0).astype(float)

    increments = np.stack(
        [
            sample_brownian(
                grid, model.m, seed.child(chain, Process.W)
            ).increments
            for chain in range(chains)
        ],
        axis=1,
    )
    streams = [
        sample_jump_stream(
            grid,
            model.jump2.rate,
            1.0,
            model.jump2.mark_law,
            seed.child(chain, Process.J2),
        )
        for chain in range(chains)
    ]
    path = integrate_frozen_fast(
        model,
        np.tile(x, (chains, 1)),
        np.tile(start, (chains, 1)),
        increments,
        BatchJumps(streams, steps),
        dt,
    )

    samples = path[burn_steps + thinning :: thinning]
    if samples.shape[0] * chains < estimator.min_samples:
        raise ConfigurationError(
            f"Only {samples.shape[0] * chains} invariant samples, "
            f"need {estimator.min_samples}; raise averaging.horizon"
        )
    return InvariantSample(x, samples, burn_in, thinning)


def averaged_drift(
    model: ModelSpec,
    x: np.ndarray,
    estimator: EstimatorConfig,
    seed: SeedSpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo b̄₁(x) = ∫ b₁(x, z) p̄(x, dz) with its standard error"""
    sample = estimate_invariant(model, x, estimator, seed)
    draws, chains, _ = sample.samples.shape
    z = sample.flat()
    values = model.b1(np.tile(sample.x, (z.shape[0], 1)), z)
    return _batch_means(values.reshape(draws, chains, -1))


def oracle_drift(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Closed-form or quadrature b̄₁ for batch x of shape (B, n)"""
    if model.oracle is None:
        raise ConfigurationError(
            f"Model '{model.name}' has no averaged-drift oracle for "
            f"these parameters"
        )
    return model.oracle(np.atleast_2d(x))


def z_free_drift(model: ModelSpec) -> Callable[[np.ndarray], np.ndarray]:
    """b̄₁ = b₁(·, z₀) for models whose slow drift ignores z"""
    if model.slow_depends_on_z:
        raise ConfigurationError(
            f"Model '{model.name}' has a z-dependent slow drift"
        )

    def drift(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return model.b1(x, np.tile(model.z0, (x.shape[0], 1)))

    return drift


def gauss_hermite_oracle(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """64-node Gauss–Hermite b̄₁ for tanh-coupled Gaussian fast processes"""
    if model.oracle_kind != "quadrature":
        raise ConfigurationError(
            f"Model '{model.name}' has no quadrature oracle"
        )
    return oracle_drift(model, x)


@dataclass
class DriftCache:
    """b̄₁ tabulated on a rectangular node grid

    Values have shape (*node_counts, n). Points outside the node hull get
    the nearest node's value. Lookups outside the hull are counted under
    a lock.
    """

    nodes: Tuple[np.ndarray, ...]
    values: np.ndarray
    se: np.ndarray
    order: str = "multilinear"
    source: str = "estimate"
    _extrapolations: int = field(
        default=0, init=False, repr=False, compare=False
    )
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if self.order not in INTERPOLATION_ORDERS:
            raise ConfigurationError(
                f"Interpolation order must be one of "
                f"{', '.join(INTERPOLATION_ORDERS)}, got '{self.order}'"
            )
        self.nodes = tuple(np.asarray(n, dtype=float) for n in self.nodes)
        method = "linear" if self.order == "multilinear" else "nearest"
        self._inside = RegularGridInterpolator(
            self.nodes, self.values, method=method
        )
        self._nearest = RegularGridInterpolator(
            self.nodes, self.values, method="nearest"
        )
        self._lows = np.array([n[0] for n in self.nodes])
        self._highs = np.array([n[-1] for n in self.nodes])

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def extrapolations(self) -> int:
        """Number of lookups with a point outside the node hull"""
        with self._lock:
            return self._extrapolations

    @property
    def extrapolated(self) -> bool:
        return self.extrapolations > 0

    def outside_hull(self, x: np.ndarray) -> np.ndarray:
        """Per-row mask of points outside the node hull"""
        x = np.atleast_2d(x)
        return np.any((x < self._lows) | (x > self._highs), axis=1)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        outside = self.outside_hull(x)
        if not outside.any():
            return self._inside(x)
        with self._lock:
            self._extrapolations += 1
        result = np.empty((x.shape[0], self.values.shape[-1]))
        if (~outside).any():
            result[~outside] = self._inside(x[~outside])
        clipped = np.clip(x[outside], self._lows, self._highs)
        result[outside] = self._nearest(clipped)
        return result

    def node_points(self) -> np.ndarray:
        """All node coordinates, shape (count, n), C order"""
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_csv(self, path: Path) -> Path:
        """Write node coordinates, values and standard errors"""
        path = Path(path)
        n, k = self.dim, self.values.shape[-1]
        header = (
            [f"x{i + 1}" for i in range(n)]
            + [f"b{i + 1}" for i in range(k)]
            + [f"se{i + 1}" for i in range(k)]
        )
        values = self.values.reshape(-1, k)
        se = self.se.reshape(-1, k)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for point, value, err in zip(self.node_points(), values, se):
                writer.writerow(
                    [f"{v:.17g}" for v in (*point, *value, *err)]
                )
        return path

    @classmethod
    def from_csv(
        cls, path: Path, order: str = "multilinear"
    ) -> "DriftCache":
        """Read a sidecar written by :meth:`to_csv`"""
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader])
        n = sum(1 for h in header if h.startswith("x"))
        k = sum(1 for h in header if h.startswith("b"))
        nodes = tuple(np.unique(rows[:, i]) for i in range(n))
        shape = tuple(len(v) for v in nodes) + (k,)
        return cls(
            nodes=nodes,
            values=rows[:, n : n + k].reshape(shape),
            se=rows[:, n + k : n + 2 * k].reshape(shape),
            order=order,
            source="sidecar",
        )


def node_grid(
    lows: Sequence[float], highs: Sequence[float], counts: Sequence[int]
) -> Tuple[np.ndarray, ...]:
    """Per-dimension uniform node lists"""
    if not len(lows) == len(highs) == len(counts):
        raise ConfigurationError("Node grid bounds and counts differ in size")
    nodes = []
    for lo, hi, count in zip(lows, highs, counts):
        if count < 2 or not hi > lo:
            raise ConfigurationError(
                f"Node grid needs ≥ 2 nodes on a non-empty range, "
                f"got [{lo}, {hi}] with {count}"
            )
        nodes.append(np.linspace(lo, hi, int(count)))
    return tuple(nodes)


def check_lipschitz(cache: DriftCache, bound: float) -> int:
    """Warn about adjacent-node slopes above ``bound``; returns the count"""
    violations = 0
    for axis, nodes in enumerate(cache.nodes):
        spacing = np.diff(nodes).reshape(
            [-1 if i == axis else 1 for i in range(cache.dim)] + [1]
        )
        slopes = np.abs(np.diff(cache.values, axis=axis)) / spacing
        steep = int(np.count_nonzero(slopes > bound))
        if steep:
            violations += steep
            print_warning(
                f"Drift cache: {steep} adjacent-node slope(s) along x{axis + 1} "
                f"exceed {bound:g} (max {slopes.max():.3g}); "
                f"estimator noise or node range misconfigured"
            )
    return violations


def build_drift_cache(
    model: ModelSpec,
    nodes: Tuple[np.ndarray, ...],
    estimator: EstimatorConfig,
    seed: SeedSpec,
    *,
    source: str = "auto",
    order: str = "multilinear",
    lipschitz_bound: Optional[float] = None,
    threads: int = 1,
) -> DriftCache:
    """Tabulate b̄₁ on the node grid with per-node standard errors

    ``source`` selects the model's oracle, the Monte Carlo estimator, or
    ``auto`` (oracle when the model has one).
    """
    if source not in DRIFT_SOURCES:
        raise ConfigurationError(
            f"Drift source must be one of {', '.join(DRIFT_SOURCES)}"
        )
    if len(nodes) != model.n:
        raise ConfigurationError(
            f"Node grid has {len(nodes)} dimensions, model has n={model.n}"
        )
    if source == "auto":
        source = "oracle" if model.oracle is not None else "estimate"

    shape = tuple(len(v) for v in nodes) + (model.n,)
    mesh = np.meshgrid(*nodes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)

    if source == "oracle":
        values = oracle_drift(model, points)
        se = np.zeros_like(values)
    else:
        total = points.shape[0]

        def estimate(index: int):
            result = averaged_drift(
                model, points[index], estimator, seed.child(index)
            )
            events.emit(EventType.Cache.NODE_DONE, index, total)
            return result

        results = ordered_map(estimate, range(total), threads)
        values = np.array([r[0] for r in results])
        se = np.array([r[1] for r in results])

    cache = DriftCache(
        nodes=nodes,
        values=values.reshape(shape),
        se=se.reshape(shape),
        order=order,
        source=source,
    )
    if lipschitz_bound is None:
        lipschitz_bound = 4.0 * np.sqrt(model.constants.get("L_b1", 1.0)) + 1.0
    check_lipschitz(cache, lipschitz_bound)
    return cache
