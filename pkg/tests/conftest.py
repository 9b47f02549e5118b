"""Test configuration for homfilter"""

import sys
from pathlib import Path

import numpy as np
import pytest
import tomlkit

# Add the project root directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.homfilter.core.averaging import oracle_drift  # noqa: E402
from src.homfilter.core.models import build_model  # noqa: E402
from src.homfilter.core.noise import TimeGrid  # noqa: E402
from src.homfilter.core.observation import (  # noqa: E402
    intensity_function,
    levy_observation,
    observation_function,
)


@pytest.fixture
def configs_dir():
    """Shipped experiment configurations"""
    return project_root / "configs"


@pytest.fixture
def grid():
    """T = 1 with dt = 0.01"""
    return TimeGrid.from_step(1.0, 0.01)


@pytest.fixture
def ou_model():
    return build_model("analytic-ou")


@pytest.fixture
def levy_model():
    """Lévy-noise signal without signal jumps, as the FD oracle needs"""
    return build_model("levy-correlated", {"c1": 0.0})


@pytest.fixture
def levy_drift(levy_model):
    return lambda x: oracle_drift(levy_model, x)


@pytest.fixture
def levy_obs():
    return levy_observation(
        observation_function("tanh", 0.5),
        intensity_function("tanh", 0.5, 0.3),
        rate=2.0,
        jump_scale=0.5,
    )


@pytest.fixture
def silent_levy_obs():
    """ȟ ≡ 0 with λ ≡ 0.5 and proposal rate 4"""
    return levy_observation(
        observation_function("zero"),
        intensity_function("constant", level=0.5),
        rate=4.0,
    )


@pytest.fixture
def zero_drift():
    return lambda x: np.zeros_like(np.atleast_2d(x))


@pytest.fixture
def small_config(tmp_path):
    """A strong-convergence sweep small enough for a unit test"""
    config_path = tmp_path / "small.toml"
    content = {
        "experiment": {"schema": "1.0", "kind": "strong-convergence"},
        "model": {"name": "analytic-ou"},
        "sweep": {"epsilons": [0.1, 0.05, 0.02]},
        "grid": {"dt": 0.002, "horizon": 0.5},
        "monte_carlo": {"replications": 3, "seed": 7, "threads": 1},
        "output": {"dir": str(tmp_path / "out")},
    }

    with open(config_path, "w", encoding="utf-8") as f:
        f.write(tomlkit.dumps(content))

    return config_path
