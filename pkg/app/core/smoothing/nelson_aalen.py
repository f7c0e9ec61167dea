# app/core/smoothing/nelson_aalen.py

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from app.core.data.sample import SurvivalSample
from app.core.smoothing.kernels import Kernel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CumulativeHazardPath:
    """
    Right-continuous step function A_hat(t) = sum_{x_i <= t} delta_i / Y(x_i).
    Tied failures are merged into one jump d(u)/Y(u).
    """
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    variance_increments: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_levels", np.concatenate([[0.0], np.cumsum(self.jump_sizes)]))
        object.__setattr__(self, "_variances", np.concatenate([[0.0], np.cumsum(self.variance_increments)]))

    def evaluate(self, t):
        idx = np.searchsorted(self.jump_times, t, side="right")
        out = self._levels[idx]
        return float(out) if np.ndim(out) == 0 else out

    __call__ = evaluate

    def variance(self, t):
        """sum_{x_i <= t} delta_i / Y(x_i)^2"""
        idx = np.searchsorted(self.jump_times, t, side="right")
        out = self._variances[idx]
        return float(out) if np.ndim(out) == 0 else out

    def survival(self, t):
        return np.exp(-np.asarray(self.evaluate(t)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.jump_times,
            "cumulative_hazard": self._levels[1:],
            "variance": self._variances[1:],
        })


def nelson_aalen(sample: SurvivalSample) -> CumulativeHazardPath:
    times, counts = np.unique(sample.failure_times, return_counts=True)
    at_risk = sample.at_risk(times).astype(float)
    return CumulativeHazardPath(
        jump_times=times,
        jump_sizes=counts / at_risk,
        variance_increments=counts / at_risk ** 2,
    )


def _window_terms(sample: SurvivalSample, kernel: Kernel, h: float, s: float):
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = sample.failures_in(s - 0.5 * h, s + 0.5 * h)
    return kernel.evaluate((x - s) / h) / h, sample.at_risk(x).astype(float)


def smoothed_hazard(sample: SurvivalSample, kernel: Kernel, h: float, s: float) -> float:
    """alpha_tilde(s) = sum over failures in (s-h/2, s+h/2] of h^-1 K((x_i - s)/h) / Y(x_i)."""
    k, y = _window_terms(sample, kernel, h, s)
    return float(np.sum(k / y))


def smoothed_hazard_variance(sample: SurvivalSample, kernel: Kernel, h: float, s: float) -> float:
    k, y = _window_terms(sample, kernel, h, s)
    return float(np.sum((k / y) ** 2))


def smoothed_hazard_curve(sample: SurvivalSample, kernel: Kernel, h: float, grid) -> pd.DataFrame:
    """Curve export with columns s, alpha_tilde, h."""
    grid = np.asarray(grid, dtype=float)
    values = np.array([smoothed_hazard(sample, kernel, h, s) for s in grid])
    return pd.DataFrame({"s": grid, "alpha_tilde": values, "h": np.full_like(grid, h)})
