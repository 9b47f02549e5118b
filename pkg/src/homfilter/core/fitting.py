"""Monte Carlo summaries and log-log slope fits"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import stats

from ..ui.console import print_warning
from .exceptions import FitError

MIN_FIT_POINTS = 3
CONFIDENCE = 0.95


def mean_and_se(values: Iterable[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (NaN for fewer than 2 values)"""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    mean = float(values.mean())
    if values.size < 2:
        return mean, float("nan")
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci: Tuple[float, float]
    intercept: float
    points: int


def fit_loglog_slope(
    points: Sequence[Tuple[float, float, float]]
) -> SlopeFit:
    """Weighted least squares of log(value) on log(ε)

    Each point is (ε, value, SE). Weights follow the delta method,
    Var(log v) ≈ (SE/v)²; points without a usable SE get unit weight.
    Non-positive values are excluded with a warning.
    """
    usable = []
    for epsilon, value, se in points:
        if not value > 0 or not epsilon > 0:
            print_warning(
                f"Excluding point ε={epsilon:g} with non-positive value "
                f"{value:g} from the slope fit"
            )
            continue
        usable.append((epsilon, value, se))

    if len(usable) < MIN_FIT_POINTS:
        raise FitError(
            f"Slope fit needs at least {MIN_FIT_POINTS} positive points, "
            f"got {len(usable)}"
        )

    eps, values, ses = (np.asarray(col, dtype=float) for col in zip(*usable))
    x = np.log(eps)
    y = np.log(values)
    relative = ses / values
    if np.all(np.isfinite(relative)) and np.all(relative > 0):
        weights = 1.0 / relative**2
    else:
        weights = np.ones_like(x)

    design = np.column_stack([np.ones_like(x), x])
    root = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(design * root[:, None], y * root, rcond=None)
    intercept, slope = coef

    dof = x.size - 2
    residuals = (y - design @ coef) * root
    scale = float(residuals @ residuals) / dof if dof > 0 else 0.0
    normal = design.T @ (design * weights[:, None])
    covariance = np.linalg.inv(normal) * scale
    half_width = stats.t.ppf(0.5 + CONFIDENCE / 2, dof) * np.sqrt(
        max(covariance[1, 1], 0.0)
    )

    return SlopeFit(
        slope=float(slope),
        ci=(float(slope - half_width), float(slope + half_width)),
        intercept=float(intercept),
        points=int(x.size),
    )
