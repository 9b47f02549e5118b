"""Experiment configuration: TOML file → ExperimentConfig"""

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import tomlkit
from packaging.specifiers import SpecifierSet
from packaging.version import InvalidVersion, Version
from tomlkit.exceptions import ParseError

from .averaging import EstimatorConfig, node_grid
from .exceptions import ConfigurationError
from .functions import get_function
from .models import LEVY_FAMILY, ModelSpec, build_model
from .noise import TimeGrid
from .observation import (
    intensity_function,
    levy_observation,
    observation_function,
    sensor_observation,
)
from .sde import check_resolution

SCHEMA_VERSION = "1.0"
SUPPORTED_SCHEMAS = SpecifierSet(">=1.0,<2")

EXPERIMENT_KINDS = (
    "strong-convergence",
    "aux-scaling",
    "filter-l1",
    "filter-weak",
    "zakai-crosscheck",
    "invariant-suite",
)
DELTA_RULES = ("power", "fixed")


@dataclass(frozen=True)
class SweepConfig:
    epsilons: Tuple[float, ...] = (0.1, 0.05, 0.02, 0.01)
    delta_rule: str = "power"
    delta_power: float = 2.0 / 3.0
    delta: float = 0.3

    def delta_for(self, epsilon: float, grid: TimeGrid) -> float:
        """δε on the time grid

        The power rule snaps ε^p to the nearest positive multiple of dt;
        a fixed δ must already be one.
        """
        if self.delta_rule == "fixed":
            width = self.delta
        else:
            steps = max(1, round(epsilon**self.delta_power / grid.dt))
            width = steps * grid.dt
        steps = grid.steps_in(width)
        if steps > grid.steps:
            raise ConfigurationError(
                f"δ={width:g} exceeds the horizon T={grid.horizon:g}"
            )
        return steps * grid.dt


@dataclass(frozen=True)
class GridConfig:
    dt: float = 1e-3
    horizon: float = 1.0


@dataclass(frozen=True)
class MonteCarloConfig:
    replications: int = 200
    seed: int = 20240917
    threads: int = 1


@dataclass(frozen=True)
class ObservationConfig:
    h: str = "tanh"
    h_scale: float = 0.5
    h_radius: float = 5.0
    correlation: float = 0.5
    intensity: str = "tanh"
    intensity_level: float = 0.5
    intensity_amplitude: float = 0.3
    jump_rate: float = 2.0
    jump_mark: str = "uniform"
    jump_scale: float = 0.5
    outside_scale: float = 0.0
    radius: float = math.inf


@dataclass(frozen=True)
class FilterConfig:
    particles: int = 5000
    function: str = "tanh"
    functions: Tuple[str, ...] = ("tanh", "clip", "gauss")
    resample: bool = True
    time: Optional[float] = None
    plateau_particles: Tuple[int, ...] = ()
    inverse_moment_powers: Tuple[float, ...] = (2.0, 3.0)


@dataclass(frozen=True)
class AveragingConfig:
    source: str = "auto"
    order: str = "multilinear"
    lo: float = -4.0
    hi: float = 4.0
    nodes: int = 41
    horizon: float = 50.0
    dt: float = 0.01
    chains: int = 16
    burn_in: Optional[float] = None
    thinning: Optional[int] = None
    lipschitz_bound: Optional[float] = None


@dataclass(frozen=True)
class ZakaiConfig:
    lo: float = -6.0
    hi: float = 6.0
    cells: int = 400
    implicit: bool = True
    snapshots: Tuple[float, ...] = ()
    residual_particles: int = 1000
    # 0 starts from a point mass at x0
    initial_std: float = 0.1


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"


_SECTIONS = {
    "sweep": SweepConfig,
    "grid": GridConfig,
    "monte_carlo": MonteCarloConfig,
    "observation": ObservationConfig,
    "filter": FilterConfig,
    "averaging": AveragingConfig,
    "zakai": ZakaiConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run, fully reconstructible from its TOML echo"""

    kind: str = "strong-convergence"
    schema: str = SCHEMA_VERSION
    model_name: str = "analytic-ou"
    model_params: Dict[str, Any] = field(default_factory=dict)
    model_constants: Dict[str, float] = field(default_factory=dict)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    averaging: AveragingConfig = field(default_factory=AveragingConfig)
    zakai: ZakaiConfig = field(default_factory=ZakaiConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigurationError(
                f"Unknown experiment kind '{self.kind}', expected one of "
                f"{', '.join(EXPERIMENT_KINDS)}"
            )
        try:
            version = Version(self.schema)
        except InvalidVersion:
            raise ConfigurationError(f"Invalid schema version '{self.schema}'")
        if version not in SUPPORTED_SCHEMAS:
            raise ConfigurationError(
                f"Config schema {self.schema} is not supported "
                f"(supported: {SUPPORTED_SCHEMAS})"
            )

        epsilons = self.sweep.epsilons
        if not epsilons:
            raise ConfigurationError("sweep.epsilons must not be empty")
        if any(not 0 < e <= 1 for e in epsilons):
            raise ConfigurationError("sweep.epsilons must lie in (0, 1]")
        if any(a <= b for a, b in zip(epsilons, epsilons[1:])):
            raise ConfigurationError("sweep.epsilons must be strictly decreasing")
        if self.sweep.delta_rule not in DELTA_RULES:
            raise ConfigurationError(
                f"sweep.delta_rule must be one of {', '.join(DELTA_RULES)}"
            )

        grid = self.time_grid()
        check_resolution(min(epsilons), grid.dt)
        for epsilon in epsilons:
            self.sweep.delta_for(epsilon, grid)
        if self.filter.time is not None:
            grid.steps_in(self.filter.time)

        if self.monte_carlo.replications < 1:
            raise ConfigurationError("monte_carlo.replications must be ≥ 1")
        if not 0 <= self.monte_carlo.seed < 2**64:
            raise ConfigurationError("monte_carlo.seed must be an unsigned 64-bit")
        if self.monte_carlo.threads < 0:
            raise ConfigurationError("monte_carlo.threads must be ≥ 0")
        if self.filter.particles < 1 or any(
            n < 1 for n in self.filter.plateau_particles
        ):
            raise ConfigurationError("Particle counts must be ≥ 1")
        for name in (self.filter.function,) + self.filter.functions:
            get_function(name)
        if self.zakai.initial_std < 0:
            raise ConfigurationError("zakai.initial_std must be ≥ 0")

    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.grid.horizon, self.grid.dt)

    def build_model(self) -> ModelSpec:
        return build_model(
            self.model_name, self.model_params, self.model_constants
        )

    def build_observation(self, model: ModelSpec):
        o = self.observation
        h = observation_function(o.h, scale=o.h_scale, radius=o.h_radius)
        if model.family == LEVY_FAMILY:
            return levy_observation(
                h,
                intensity_function(
                    o.intensity, o.intensity_level, o.intensity_amplitude
                ),
                rate=o.jump_rate,
                mark_law=o.jump_mark,
                jump_scale=o.jump_scale,
                outside_scale=o.outside_scale,
                radius=o.radius,
            )
        return sensor_observation(h, o.correlation)

    def estimator(self) -> EstimatorConfig:
        a = self.averaging
        return EstimatorConfig(
            horizon=a.horizon,
            dt=a.dt,
            chains=a.chains,
            burn_in=a.burn_in,
            thinning=a.thinning,
        )

    def cache_nodes(self, model: ModelSpec):
        a = self.averaging
        return node_grid([a.lo] * model.n, [a.hi] * model.n, [a.nodes] * model.n)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.dir)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[Union[str, Path]] = None,
        threads: Optional[int] = None,
        kind: Optional[str] = None,
    ) -> "ExperimentConfig":
        """Apply command-line flags on top of the file values"""
        config = self
        if seed is not None or threads is not None:
            config = replace(
                config,
                monte_carlo=replace(
                    config.monte_carlo,
                    seed=self.monte_carlo.seed if seed is None else int(seed),
                    threads=(
                        self.monte_carlo.threads
                        if threads is None
                        else int(threads)
                    ),
                ),
            )
        if out is not None:
            config = replace(config, output=OutputConfig(dir=str(out)))
        if kind is not None:
            config = replace(config, kind=kind)
        return config

    def to_toml(self) -> str:
        """Effective configuration as TOML text"""
        doc = tomlkit.document()
        doc.add("experiment", _table({"schema": self.schema, "kind": self.kind}))
        model = _table({"name": self.model_name})
        model.add("params", _table(self.model_params))
        model.add("constants", _table(self.model_constants))
        doc.add("model", model)
        for name in _SECTIONS:
            doc.add(name, _table(asdict(getattr(self, name))))
        return tomlkit.dumps(doc)


def _table(values: Dict[str, Any]) -> tomlkit.items.Table:
    table = tomlkit.table()
    for key, value in values.items():
        if value is None:
            continue
        table.add(key, list(value) if isinstance(value, tuple) else value)
    return table


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    number = isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigurationError(f"{where} must be an integer")
        return value
    if default is None:
        if not number:
            raise ConfigurationError(f"{where} must be a number")
        return value
    if isinstance(default, float):
        if not number:
            raise ConfigurationError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{where} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigurationError(f"{where} must be an array")
        return tuple(value)
    return value


def _section(cls, table: Optional[Dict[str, Any]], name: str):
    table = dict(table or {})
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigurationError(
            f"Unknown key(s) in [{name}]: {', '.join(unknown)}"
        )
    defaults = cls()
    values = {
        key: _coerce(name, key, value, getattr(defaults, key))
        for key, value in table.items()
    }
    return cls(**values)


def config_from_mapping(data: Dict[str, Any]) -> ExperimentConfig:
    """Build a config from parsed TOML; unknown sections or keys fail"""
    data = dict(data)
    allowed = {"experiment", "model"} | set(_SECTIONS)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError(f"Unknown section(s): {', '.join(unknown)}")

    experiment = dict(data.pop("experiment", {}))
    extra = sorted(set(experiment) - {"schema", "kind"})
    if extra:
        raise ConfigurationError(
            f"Unknown key(s) in [experiment]: {', '.join(extra)}"
        )
    model = dict(data.pop("model", {}))
    extra = sorted(set(model) - {"name", "params", "constants"})
    if extra:
        raise ConfigurationError(f"Unknown key(s) in [model]: {', '.join(extra)}")

    return ExperimentConfig(
        kind=str(experiment.get("kind", "strong-convergence")),
        schema=str(experiment.get("schema", SCHEMA_VERSION)),
        model_name=str(model.get("name", "analytic-ou")),
        model_params=dict(model.get("params", {})),
        model_constants={
            k: float(v) for k, v in dict(model.get("constants", {})).items()
        },
        **{
            name: _section(cls, data.get(name), name)
            for name, cls in _SECTIONS.items()
        },
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment TOML file"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            document = tomlkit.parse(f.read())
    except ParseError as e:
        raise ConfigurationError(f"Cannot parse {path}: {e}")
    return config_from_mapping(document.unwrap())
