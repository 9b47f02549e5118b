"""Mark-law registry for finite Lévy measures ν = r · markLaw"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .exceptions import ConfigurationError

QUADRATURE_ORDER = 32


@lru_cache(maxsize=None)
def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    return nodes, weights / 2.0


@lru_cache(maxsize=None)
def _hermite_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermegauss(order)
    return nodes, weights / weights.sum()


@dataclass(frozen=True)
class MarkLaw:
    """Probability law of the marks u ∈ ℝ of a compound Poisson stream"""

    name: str
    location: float = 1.0

    @property
    def identifier(self) -> str:
        if self.name == "point":
            return f"point:{self.location:g}"
        return self.name

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw i.i.d. marks"""
        if self.name == "uniform":
            return rng.uniform(-1.0, 1.0, size=size)
        if self.name == "normal":
            return rng.standard_normal(size=size)
        return np.full(size, self.location, dtype=float)

    def moment(self, k: int) -> float:
        """Raw moment E[u^k]"""
        if k == 0:
            return 1.0
        if self.name == "uniform":
            return 0.0 if k % 2 else 1.0 / (k + 1)
        if self.name == "normal":
            if k % 2:
                return 0.0
            return float(np.prod(np.arange(k - 1, 0, -2)))
        return float(self.location**k)

    def quadrature(
        self, order: int = QUADRATURE_ORDER
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and probability weights integrating against the mark law

        Gauss–Legendre on (−1, 1) for the uniform law, Gauss–Hermite for
        the standard normal, a single node for the point mass.
        """
        if self.name == "uniform":
            return _legendre_rule(order)
        if self.name == "normal":
            return _hermite_rule(order)
        return np.array([self.location]), np.array([1.0])

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """E[fn(u)] by quadrature; fn maps a node array of shape (q,) to
        values of shape (q, ...)"""
        nodes, weights = self.quadrature()
        values = np.asarray(fn(nodes), dtype=float)
        return np.tensordot(weights, values, axes=(0, 0))


MARK_LAWS: Dict[str, str] = {
    "uniform": "Uniform(-1, 1)",
    "normal": "standard normal",
    "point": "point mass (point:<location>, default 1)",
}


def parse_mark_law(identifier: str) -> MarkLaw:
    """Resolve a registry identifier such as ``uniform`` or ``point:0.5``"""
    name, _, argument = str(identifier).strip().partition(":")
    if name not in MARK_LAWS:
        raise ConfigurationError(
            f"Unknown mark law '{identifier}', expected one of "
            f"{', '.join(MARK_LAWS)}"
        )
    if name != "point":
        if argument:
            raise ConfigurationError(
                f"Mark law '{name}' takes no argument: '{identifier}'"
            )
        return MarkLaw(name)
    try:
        location = float(argument) if argument else 1.0
    except ValueError:
        raise ConfigurationError(f"Invalid point-mass location: '{argument}'")
    return MarkLaw("point", location)
