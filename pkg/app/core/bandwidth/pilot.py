# app/core/bandwidth/pilot.py

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.config import settings
from app.core.bandwidth.plan import PilotConfig
from app.core.data.sample import SurvivalSample
from app.core.errors import PilotError
from app.core.smoothing.kernels import Kernel, get_kernel

logger = logging.getLogger(__name__)


def default_pilot_bandwidth(sample: SurvivalSample) -> float:
    """PILOT_BANDWIDTH_FACTOR * (observed range) / n^(1/5)."""
    span = sample.max_time - float(sample.times[0])
    if not span > 0:
        span = sample.horizon
    return settings.PILOT_BANDWIDTH_FACTOR * span / sample.n ** 0.2


@dataclass(frozen=True, eq=False)
class PilotEstimate:
    """
    Kernel-smoothed Nelson-Aalen pilot with analytic derivatives:
      alpha(s)   = sum h^-1 K(u_i) / Y(x_i)
      alpha'(s)  = -sum h^-2 K'(u_i) / Y(x_i)
      alpha''(s) = sum h^-3 K''(u_i) / Y(x_i),   u_i = (x_i - s)/h
    over failures. Outside [h/2, max_time - h/2] every method returns NaN.
    """
    sample: SurvivalSample
    kernel: Kernel
    h2: float

    def valid(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        half = 0.5 * self.h2
        return (s - half >= 0.0) & (s + half <= self.sample.max_time)

    def _smooth(self, s, order: int, times: np.ndarray, power: int = 1) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.full(s.shape, np.nan)
        y = self.sample.at_risk(times).astype(float)
        h = self.h2
        ok = self.valid(s)
        for i in np.flatnonzero(ok):
            lo = np.searchsorted(times, s[i] - 0.5 * h, side="right")
            hi = np.searchsorted(times, s[i] + 0.5 * h, side="right")
            u = (times[lo:hi] - s[i]) / h
            if order == 0:
                k = self.kernel.evaluate(u) / h
            elif order == 1:
                k = -self.kernel.derivative(u, 1) / h ** 2
            else:
                k = self.kernel.derivative(u, 2) / h ** 3
            out[i] = np.sum((k / y[lo:hi]) ** power)
        return out

    def alpha(self, s):
        return self._smooth(s, 0, self.sample.failure_times)

    def d1(self, s):
        return self._smooth(s, 1, self.sample.failure_times)

    def d2(self, s):
        return self._smooth(s, 2, self.sample.failure_times)

    def d2_variance(self, s):
        """sum h^-6 K''(u_i)^2 / Y(x_i)^2, the noise level of alpha''."""
        return self._smooth(s, 2, self.sample.failure_times, power=2)

    def exit_rate(self, s):
        """Smoothed hazard of all observed times; estimates -y'(s)/y(s)."""
        return self._smooth(s, 0, self.sample.times)


def pilot_estimate(sample: SurvivalSample, config: Optional[PilotConfig] = None) -> PilotEstimate:
    config = config or PilotConfig()
    if sample.n_failures < settings.PILOT_MIN_FAILURES:
        raise PilotError(
            f"pilot needs at least {settings.PILOT_MIN_FAILURES} failures, sample has "
            f"{sample.n_failures}; use a fixed bandwidth instead"
        )
    kernel = get_kernel(config.kernel)
    h2 = config.h2 if config.h2 is not None else default_pilot_bandwidth(sample)
    if not h2 < sample.max_time:
        logger.warning(f"Pilot bandwidth {h2:.4g} spans the whole data range; no interior points")
    logger.debug(f"Pilot estimate with {kernel.name} kernel, h2={h2:.4g}")
    return PilotEstimate(sample=sample, kernel=kernel, h2=float(h2))
