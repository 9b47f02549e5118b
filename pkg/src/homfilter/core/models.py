"""Model catalog: coefficient registry, ModelSpec and assumption constants.

Every model is assembled from a closed registry of coefficient families.
Coefficients are vectorized over a batch axis: states have shape
``(B, n)`` / ``(B, m)``, diffusion matrices ``(B, rows, cols)`` and jump
marks ``(B,)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..ui.console import print_warning
from .exceptions import ConfigurationError
from .marks import MarkLaw, parse_mark_law

SENSOR_FAMILY = "sensor"
LEVY_FAMILY = "levy"

ORACLE_QUADRATURE_ORDER = 64

DISSIPATIVITY_CONSTANTS = ("L_b2", "Lbar_b2", "L_sigma2", "int_L2_nu2")
SLOW_CONSTANTS = ("L_b1", "L_sigma1", "L_f1", "L_b1_sigma1_f1")
ALL_CONSTANTS = SLOW_CONSTANTS + DISSIPATIVITY_CONSTANTS


@dataclass(frozen=True)
class Coefficient:
    """One registered coefficient function"""

    name: str
    role: str
    assumptions: str
    fn: Callable[..., np.ndarray] = field(compare=False, repr=False)
    depends_on_x: bool = True

    def __call__(self, *args: np.ndarray) -> np.ndarray:
        return self.fn(*args)


@dataclass(frozen=True)
class JumpMeasure:
    """Finite Lévy measure ν = rate · markLaw"""

    rate: float
    mark_law: MarkLaw

    def __post_init__(self):
        if self.rate < 0 or not np.isfinite(self.rate):
            raise ConfigurationError(f"Jump rate must be ≥ 0, got {self.rate}")

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """∫ fn(u) ν(du)"""
        return self.rate * self.mark_law.expect(fn)


def jump_mean(
    coefficient: Coefficient, measure: JumpMeasure, *state: np.ndarray
) -> np.ndarray:
    """∫ f(state, u) ν(du) for a batch of states, by quadrature"""
    batch = state[0].shape[0]
    if measure.rate == 0:
        return np.zeros((batch, state[0].shape[1]))
    nodes, weights = measure.mark_law.quadrature()
    order = nodes.size
    repeated = [np.repeat(s, order, axis=0) for s in state]
    values = coefficient(*repeated, np.tile(nodes, batch))
    values = values.reshape(batch, order, -1)
    return measure.rate * np.einsum("bqk,q->bk", values, weights)


def _batch(array: np.ndarray) -> int:
    return np.shape(array)[0]


# Coefficient registry


def _sin_linear(params: Dict[str, float]) -> Coefficient:
    theta, q = params["theta"], params["q"]

    def b1(x, z):
        return theta * np.sin(x[:, :1]) + q * z[:, :1]

    return Coefficient(
        "sin-linear",
        "b1",
        "Lipschitz (H1) with L_b1 = θ² + q²; linear growth in z, so the "
        "boundedness hypothesis (H2) holds only on bounded z-ranges",
        b1,
    )


def _sin_tanh(params: Dict[str, float]) -> Coefficient:
    theta, q = params["theta"], params["q"]

    def b1(x, z):
        return theta * np.sin(x[:, :1]) + q * np.tanh(z[:, :1])

    return Coefficient(
        "sin-tanh",
        "b1",
        "Lipschitz (H1) with L_b1 = θ² + q² and bounded (H2) by (|θ|+|q|)²",
        b1,
    )


def _constant_diffusion(role: str, value: float) -> Coefficient:
    def sigma(*state):
        return np.full((_batch(state[0]), 1, 1), value)

    return Coefficient(
        "constant",
        role,
        "constant: Lipschitz constant 0, bounded by its square",
        sigma,
        depends_on_x=False,
    )


def _linear_mark(role: str, scale: float) -> Coefficient:
    def jump(*args):
        marks = args[-1]
        return scale * np.reshape(marks, (-1, 1))

    return Coefficient(
        "linear-mark",
        role,
        "state-independent c·u: Lipschitz constant 0, "
        "∫|f|²ν = c²·r·E[u²]",
        jump,
        depends_on_x=False,
    )


def _ou_tanh(params: Dict[str, float]) -> Coefficient:
    kappa, c = params["kappa"], params["c"]

    def b2(x, z):
        return -kappa * (z[:, :1] - c * np.tanh(x[:, :1]))

    return Coefficient(
        "ou-tanh",
        "b2",
        "dissipative (H1_b2) with L_b2 = κ|c| and L̄_b2 = κ; linear growth",
        b2,
        depends_on_x=c != 0,
    )


def _zero(role: str, columns: int = 1) -> Coefficient:
    def zero(*args):
        if role.startswith("sigma"):
            return np.zeros((_batch(args[0]), 1, columns))
        return np.zeros((_batch(args[0]), 1))

    return Coefficient(
        "zero", role, "identically zero: satisfies every hypothesis", zero,
        depends_on_x=False,
    )


COEFFICIENTS: Dict[str, str] = {
    "sin-linear": "b1(x, z) = θ sin x + q z",
    "sin-tanh": "b1(x, z) = θ sin x + q tanh z",
    "ou-tanh": "b2(x, z) = −κ (z − c tanh x)",
    "constant": "σ(x[, z]) = s",
    "linear-mark": "f(·, u) = c u",
    "zero": "0",
}


@lru_cache(maxsize=None)
def _hermite_nodes(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermegauss(order)
    return nodes, weights / weights.sum()


def gaussian_expectation(
    fn: Callable[[np.ndarray], np.ndarray],
    mean: np.ndarray,
    std: float,
    order: int = ORACLE_QUADRATURE_ORDER,
) -> np.ndarray:
    """E fn(G) for G ~ Normal(mean, std²), elementwise over ``mean``"""
    nodes, weights = _hermite_nodes(order)
    values = fn(np.asarray(mean)[..., None] + std * nodes)
    return values @ weights


@dataclass
class ModelSpec:
    """Coefficients, noise measures and declared constants of one system

    ``family`` is ``sensor`` for the correlated sensor-noise system and
    ``levy`` for the correlated Lévy-noise system, whose slow equation
    carries an additional σ̌₀ dB channel.
    """

    name: str
    family: str
    params: Dict[str, Any]
    b1: Coefficient
    sigma1: Coefficient
    f1: Coefficient
    b2: Coefficient
    sigma2: Coefficient
    f2: Coefficient
    jump1: JumpMeasure
    jump2: JumpMeasure
    constants: Dict[str, float]
    x0: np.ndarray
    z0: np.ndarray
    sigma0: Optional[Coefficient] = None
    oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    oracle_kind: Optional[str] = None
    assumption_exception: Optional[str] = None
    dims: Dict[str, int] = field(
        default_factory=lambda: {"n": 1, "m": 1, "l": 1, "j": 1}
    )

    def __post_init__(self):
        if self.family not in (SENSOR_FAMILY, LEVY_FAMILY):
            raise ConfigurationError(f"Unknown model family '{self.family}'")
        for key, value in self.constants.items():
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(
                    f"Declared constant {key} must be finite and ≥ 0, "
                    f"got {value}"
                )
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.z0 = np.atleast_1d(np.asarray(self.z0, dtype=float))
        if self.sigma0 is None:
            self.sigma0 = _zero("sigma0", self.dims["j"])

    @property
    def n(self) -> int:
        return self.dims["n"]

    @property
    def m(self) -> int:
        return self.dims["m"]

    @property
    def fast_depends_on_x(self) -> bool:
        return (
            self.b2.depends_on_x
            or self.sigma2.depends_on_x
            or self.f2.depends_on_x
        )

    @property
    def slow_depends_on_z(self) -> bool:
        return self.params.get("q", 0.0) != 0

    def diffusion_trace(self, x: np.ndarray) -> np.ndarray:
        """Per-sample σ₀σ₀′ + σ₁σ₁′ of the slow equation, shape (B, n, n)"""
        s0 = self.sigma0(x)
        s1 = self.sigma1(x)
        return s0 @ np.swapaxes(s0, 1, 2) + s1 @ np.swapaxes(s1, 1, 2)


def _default_constants(params: Dict[str, Any], coupling: str) -> Dict[str, float]:
    theta, q, c = params["theta"], params["q"], params["c"]
    kappa = params["kappa"]
    law1, law2 = params["_law1"], params["_law2"]
    jump1 = params["c1"] ** 2 * params["r1"] * law1.moment(2)
    jump2 = params.get("c2", 0.0) ** 2 * params.get("r2", 0.0) * law2.moment(2)
    diffusion = params["sigma1"] ** 2 + params.get("sigma0", 0.0) ** 2

    if coupling == "tanh":
        bound_b1 = (abs(theta) + abs(q)) ** 2
    else:
        # Linear coupling is unbounded in z; bound on the stationary range
        spread = np.sqrt(
            (params["sigma2"] ** 2 + jump2) / (2 * kappa) if kappa > 0 else 0.0
        )
        bound_b1 = (abs(theta) + abs(q) * (abs(c) + 4 * spread)) ** 2

    return {
        "L_b1": theta**2 + q**2,
        "L_sigma1": 0.0,
        "L_f1": 0.0,
        "L_b1_sigma1_f1": bound_b1 + diffusion + jump1,
        "L_b2": abs(kappa * c),
        "Lbar_b2": kappa,
        "L_sigma2": 0.0,
        "int_L2_nu2": jump2,
    }


def _make_oracle(
    params: Dict[str, Any], coupling: str, fast_jumps: bool
) -> Tuple[Optional[Callable], Optional[str]]:
    theta, q, c = params["theta"], params["q"], params["c"]
    kappa, sigma2 = params["kappa"], params["sigma2"]

    if coupling == "linear":

        def closed_form(x):
            x = np.atleast_2d(x)
            return theta * np.sin(x) + q * c * np.tanh(x)

        return closed_form, "closed-form"

    if fast_jumps or kappa <= 0:
        return None, None

    std = sigma2 / np.sqrt(2 * kappa)

    def quadrature(x):
        x = np.atleast_2d(x)
        return theta * np.sin(x) + q * gaussian_expectation(
            np.tanh, c * np.tanh(x), std
        )

    return quadrature, "quadrature"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    family: str
    description: str
    defaults: Dict[str, Any]
    assumption_exception: Optional[str] = None


_FAST_DEFAULTS = {
    "c": 1.0,
    "kappa": 1.0,
    "sigma2": 1.0,
    "x0": 0.5,
    "z0": 0.0,
}

CATALOG: Dict[str, CatalogEntry] = {
    "analytic-ou": CatalogEntry(
        name="analytic-ou",
        family=SENSOR_FAMILY,
        description="b1 = θ sin x + q z over a jump OU fast process "
        "with closed-form averaged drift",
        defaults={
            "theta": 0.5,
            "q": 1.0,
            "sigma1": 0.5,
            "c1": 0.5,
            "r1": 1.0,
            "mark1": "uniform",
            "c2": 0.5,
            "r2": 1.0,
            "mark2": "uniform",
            "slow_coupling": "linear",
            **_FAST_DEFAULTS,
        },
        assumption_exception="b1 grows linearly in z, so (H2_b1,σ1,f1) "
        "holds only on the bounded range the fast process visits",
    ),
    "bounded-tanh": CatalogEntry(
        name="bounded-tanh",
        family=SENSOR_FAMILY,
        description="b1 = θ sin x + q tanh z over a Gaussian OU fast "
        "process; averaged drift by Gauss–Hermite quadrature",
        defaults={
            "theta": 0.5,
            "q": 1.0,
            "sigma1": 0.5,
            "c1": 0.5,
            "r1": 1.0,
            "mark1": "uniform",
            "slow_coupling": "tanh",
            **_FAST_DEFAULTS,
        },
    ),
    "levy-correlated": CatalogEntry(
        name="levy-correlated",
        family=LEVY_FAMILY,
        description="correlated Lévy-noise signal with σ̌0 dB + σ̌1 dV "
        "channels over the analytic-ou fast process",
        defaults={
            "theta": 0.5,
            "q": 1.0,
            "sigma0": 0.3,
            "sigma1": 0.4,
            "c1": 0.3,
            "r1": 1.0,
            "mark1": "uniform",
            "c2": 0.5,
            "r2": 1.0,
            "mark2": "uniform",
            "slow_coupling": "linear",
            **_FAST_DEFAULTS,
        },
    ),
}

_STRING_PARAMS = ("mark1", "mark2", "slow_coupling")


def _resolve_params(
    entry: CatalogEntry, overrides: Optional[Dict[str, Any]]
) -> Dict[str, Any]:
    params = dict(entry.defaults)
    for key, value in (overrides or {}).items():
        if key not in entry.defaults:
            raise ConfigurationError(
                f"Unknown parameter '{key}' for model '{entry.name}', "
                f"expected one of {', '.join(sorted(entry.defaults))}"
            )
        if key in _STRING_PARAMS:
            params[key] = str(value)
            continue
        try:
            params[key] = float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"Parameter '{key}' must be a number, got {value!r}"
            )
        if not np.isfinite(params[key]):
            raise ConfigurationError(f"Parameter '{key}' must be finite")

    if params["slow_coupling"] not in ("linear", "tanh"):
        raise ConfigurationError(
            f"slow_coupling must be 'linear' or 'tanh', "
            f"got '{params['slow_coupling']}'"
        )
    for key in ("r1", "r2", "kappa"):
        if params.get(key, 0.0) < 0:
            raise ConfigurationError(f"Parameter '{key}' must be ≥ 0")
    params["_law1"] = parse_mark_law(params["mark1"])
    params["_law2"] = parse_mark_law(params.get("mark2", "uniform"))
    return params


def build_model(
    name: str,
    params: Optional[Dict[str, Any]] = None,
    constants: Optional[Dict[str, float]] = None,
) -> ModelSpec:
    """Build a catalog model with parameter and constant overrides

    Declared constants default to values derived from the parameters;
    entries in ``constants`` replace them.
    """
    if name not in CATALOG:
        raise ConfigurationError(
            f"Unknown model '{name}', expected one of {', '.join(CATALOG)}"
        )
    entry = CATALOG[name]
    p = _resolve_params(entry, params)
    coupling = p["slow_coupling"]

    declared = _default_constants(p, coupling)
    for key, value in (constants or {}).items():
        if key not in ALL_CONSTANTS:
            raise ConfigurationError(
                f"Unknown constant '{key}', expected one of "
                f"{', '.join(ALL_CONSTANTS)}"
            )
        declared[key] = float(value)

    c2 = p.get("c2", 0.0)
    r2 = p.get("r2", 0.0)
    fast_jumps = c2 != 0 and r2 != 0
    f2 = _linear_mark("f2", c2) if "c2" in p else _zero("f2")
    oracle, oracle_kind = _make_oracle(p, coupling, fast_jumps)

    sigma0 = None
    if entry.family == LEVY_FAMILY:
        sigma0 = _constant_diffusion("sigma0", p["sigma0"])

    params_out = {k: v for k, v in p.items() if not k.startswith("_")}
    return ModelSpec(
        name=name,
        family=entry.family,
        params=params_out,
        b1=_sin_tanh(p) if coupling == "tanh" else _sin_linear(p),
        sigma1=_constant_diffusion("sigma1", p["sigma1"]),
        f1=_linear_mark("f1", p["c1"]),
        b2=_ou_tanh(p),
        sigma2=_constant_diffusion("sigma2", p["sigma2"]),
        f2=f2,
        jump1=JumpMeasure(p["r1"], p["_law1"]),
        jump2=JumpMeasure(r2, p["_law2"]),
        constants=declared,
        x0=np.array([p["x0"]]),
        z0=np.array([p["z0"]]),
        sigma0=sigma0,
        oracle=oracle,
        oracle_kind=oracle_kind,
        assumption_exception=(
            entry.assumption_exception if coupling == "linear" else None
        ),
    )


def verify_dissipativity(model: ModelSpec) -> float:
    """M = 2L̄_b2 − L_b2 − 2L²_σ2 − 2∫L²(u)ν2(du); warns when M ≤ 0"""
    missing = [k for k in DISSIPATIVITY_CONSTANTS if k not in model.constants]
    if missing:
        raise ConfigurationError(
            f"Model '{model.name}' is missing declared constants: "
            f"{', '.join(missing)}"
        )
    c = model.constants
    value = (
        2 * c["Lbar_b2"]
        - c["L_b2"]
        - 2 * c["L_sigma2"] ** 2
        - 2 * c["int_L2_nu2"]
    )
    if value <= 0:
        print_warning(
            f"Model '{model.name}' fails the dissipativity condition "
            f"(M = {value:g} ≤ 0)"
        )
    return float(value)


def is_dissipative(model: ModelSpec) -> bool:
    return verify_dissipativity(model) > 0
