"""Registered test functions with first and second derivatives"""

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from .exceptions import ConfigurationError

CLIP_RADIUS = 5.0


@dataclass(frozen=True)
class TestFunction:
    """ψ: ℝⁿ → ℝ evaluated on batches x of shape (B, n)"""

    __test__ = False

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    smooth: bool = True
    bounded: bool = True

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(np.atleast_2d(x))


def _unit(x: np.ndarray) -> np.ndarray:
    e1 = np.zeros_like(x)
    e1[:, 0] = 1.0
    return e1


def _outer_e1(x: np.ndarray, scale: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], x.shape[1], x.shape[1]))
    out[:, 0, 0] = scale
    return out


def _zeros_hessian(x: np.ndarray) -> np.ndarray:
    return np.zeros((x.shape[0], x.shape[1], x.shape[1]))


def _tanh_gradient(x):
    t = np.tanh(x[:, 0])
    return _unit(x) * (1 - t**2)[:, None]


def _tanh_hessian(x):
    t = np.tanh(x[:, 0])
    return _outer_e1(x, -2 * t * (1 - t**2))


def _clip_gradient(x):
    inside = np.abs(x[:, 0]) < CLIP_RADIUS
    return _unit(x) * inside[:, None]


def _gauss(x):
    return np.exp(-np.sum(x**2, axis=1))


def _gauss_gradient(x):
    return -2 * x * _gauss(x)[:, None]


def _gauss_hessian(x):
    eye = np.eye(x.shape[1])[None]
    outer = x[:, :, None] * x[:, None, :]
    return (4 * outer - 2 * eye) * _gauss(x)[:, None, None]


FUNCTIONS: Dict[str, TestFunction] = {
    "one": TestFunction(
        "one",
        lambda x: np.ones(x.shape[0]),
        np.zeros_like,
        _zeros_hessian,
    ),
    "identity": TestFunction(
        "identity",
        lambda x: x[:, 0].copy(),
        _unit,
        _zeros_hessian,
        bounded=False,
    ),
    "square": TestFunction(
        "square",
        lambda x: np.sum(x**2, axis=1),
        lambda x: 2 * x,
        lambda x: np.broadcast_to(
            2 * np.eye(x.shape[1]), (x.shape[0], x.shape[1], x.shape[1])
        ).copy(),
        bounded=False,
    ),
    "tanh": TestFunction(
        "tanh",
        lambda x: np.tanh(x[:, 0]),
        _tanh_gradient,
        _tanh_hessian,
    ),
    "clip": TestFunction(
        "clip",
        lambda x: np.clip(x[:, 0], -CLIP_RADIUS, CLIP_RADIUS),
        _clip_gradient,
        _zeros_hessian,
        smooth=False,
    ),
    "gauss": TestFunction(
        "gauss",
        _gauss,
        _gauss_gradient,
        _gauss_hessian,
    ),
}

DEFAULT_TEST_FUNCTIONS: Tuple[str, ...] = ("tanh", "clip", "gauss")


def get_function(name: str) -> TestFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"Unregistered test function '{name}', expected one of "
            f"{', '.join(FUNCTIONS)}"
        )
