# app/core/gof/windows.py

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.data.sample import SurvivalSample
from app.core.errors import InsufficientWindowError
from app.core.gof.path import dn_path
from app.core.gof.statistics import GofDecision, default_kind, gof_statistic
from app.core.parametric.families import HazardFamily
from app.core.parametric.fitting import FitResult, fit_weighted_mle

logger = logging.getLogger(__name__)

# Relative nudge so a failure sitting on the open left edge is inside
_EDGE = 1e-9


@dataclass(frozen=True)
class WindowChoice:
    """h_hat(s); `sentinel` means no departure was detected up to the full range."""
    s: float
    h: float
    sentinel: bool
    statistic_at_stop: float
    kind: str
    level: float
    h_min: float
    tests: int

    def to_dict(self) -> Dict:
        return {
            "s": self.s,
            "h_hat": self.h,
            "statistic_at_stop": self.statistic_at_stop,
            "kind": self.kind,
            "level": self.level,
            "sentinel_flag": self.sentinel,
        }


@dataclass(frozen=True)
class StartupChoice:
    """
    Boundary interval where the global fit is trusted: [0, boundary] on the
    left, [boundary, T] on the right (mirrored policy).
    """
    boundary: float
    fit: FitResult
    rejected: bool
    rejected_at: Optional[float]
    side: str

    @property
    def b0(self) -> float:
        return self.boundary

    @property
    def theta_start(self) -> np.ndarray:
        return self.fit.theta_hat


def window_bounds(s: float, h: float, horizon: float) -> Tuple[float, float]:
    return max(0.0, s - 0.5 * h), min(horizon, s + 0.5 * h)


def smallest_feasible_h(sample: SurvivalSample, s: float, min_events: int) -> float:
    """Smallest h with at least min_events failures in (s - h/2, s + h/2] within [0, T]."""
    fails = sample.failure_times
    fails = fails[(fails > 0) & (fails <= sample.horizon)]
    if fails.size < min_events:
        raise InsufficientWindowError(
            f"{fails.size} failures in the sample, the window needs {min_events}"
        )
    need = np.where(fails > s, 2.0 * (fails - s), 2.0 * (s - fails) * (1.0 + _EDGE) + _EDGE)
    return float(np.sort(need)[min_events - 1])


def geometric_grid(start: float, stop: float, ratio: float) -> np.ndarray:
    if start >= stop:
        return np.array([stop])
    count = int(math.ceil(math.log(stop / start) / math.log(ratio)))
    grid = start * ratio ** np.arange(count)
    return np.append(grid[grid < stop], stop)


def _test(sample, family, interval, kind, level) -> GofDecision:
    return gof_statistic(dn_path(sample, family, interval), kind, level)


def expand_window(
    sample: SurvivalSample,
    family: HazardFamily,
    s: float,
    kind: Optional[str] = None,
    level: Optional[float] = None,
    min_events: Optional[int] = None,
    h_grid: Optional[Sequence[float]] = None,
) -> WindowChoice:
    """
    Stretches (s - h/2, s + h/2] over an ascending h grid, starting at the
    smallest h holding min_events failures, and stops at the first rejection.
    Returns the last accepted h (h_min when the first test rejects), or the
    full-range sentinel when nothing rejects.
    """
    kind = kind or default_kind(family)
    level = settings.GOF_LEVEL if level is None else level
    min_events = min_events or settings.MIN_EVENTS
    T = sample.horizon
    h_full = 2.0 * max(s, T - s)
    h_min = smallest_feasible_h(sample, s, min_events)

    if h_grid is None:
        grid = geometric_grid(min(h_min, h_full), h_full, settings.GOF_H_GRID_RATIO)
    else:
        grid = np.asarray(h_grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("h_grid must be strictly ascending")
        grid = grid[grid >= h_min]
        if grid.size == 0:
            raise InsufficientWindowError(f"no h on the grid reaches {min_events} failures around s={s:g}")

    previous = None
    statistic = float("nan")
    for tests, h in enumerate(grid, start=1):
        decision = _test(sample, family, window_bounds(s, h, T), kind, level)
        statistic = decision.statistic
        if decision.reject:
            chosen = previous if previous is not None else float(h)
            logger.debug(f"Window at s={s:g} rejected at h={h:.4g}; h_hat={chosen:.4g}")
            return WindowChoice(s, chosen, False, statistic, kind, level, h_min, tests)
        previous = float(h)

    if previous is not None and previous >= h_full:
        return WindowChoice(s, float("inf"), True, statistic, kind, level, h_min, len(grid))
    # an explicit grid that stops short of the full range
    return WindowChoice(s, previous, False, statistic, kind, level, h_min, len(grid))


def startup_interval(
    sample: SurvivalSample,
    family: HazardFamily,
    kind: Optional[str] = None,
    level: Optional[float] = None,
    min_events: Optional[int] = None,
    side: str = "left",
) -> StartupChoice:
    """
    Scans [0, b] (or [T - L, T] on the right) upward from the smallest
    interval holding min_events failures. At the first rejection the
    boundary interval shrinks by STARTUP_SHRINK, never below the minimum;
    without rejection it is the whole [0, T]. The family is then fitted
    on the chosen interval with g = 1.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got '{side}'")
    kind = kind or default_kind(family)
    level = settings.GOF_LEVEL if level is None else level
    min_events = min_events or settings.MIN_EVENTS
    T = sample.horizon
    fails = sample.failure_times
    fails = fails[(fails > 0) & (fails <= T)]
    if fails.size < min_events:
        raise InsufficientWindowError(f"{fails.size} failures in the sample, startup needs {min_events}")

    if side == "left":
        length_min = float(fails[min_events - 1])
    else:
        length_min = (T - float(fails[-min_events])) * (1.0 + _EDGE) + _EDGE * T
        length_min = min(length_min, T)

    def interval(length):
        return (0.0, length) if side == "left" else (T - length, T)

    rejected_at = None
    for length in geometric_grid(length_min, T, settings.STARTUP_GRID_RATIO):
        if _test(sample, family, interval(length), kind, level).reject:
            rejected_at = float(length)
            break

    if rejected_at is None:
        length0 = T
    else:
        length0 = max(settings.STARTUP_SHRINK * rejected_at, length_min)
    a, b = interval(length0)
    fit = fit_weighted_mle(sample, family, None, (a, b))
    boundary = b if side == "left" else a
    logger.info(
        f"Startup ({side}): boundary {boundary:.4g}"
        + (f", first rejection at length {rejected_at:.4g}" if rejected_at is not None else ", never rejected")
    )
    return StartupChoice(boundary=boundary, fit=fit, rejected=rejected_at is not None,
                         rejected_at=rejected_at, side=side)
