# app/core/data/sample.py

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate

from app.config import settings

logger = logging.getLogger(__name__)

WeightLike = Union[None, float, Callable[[np.ndarray], np.ndarray]]


@lru_cache(maxsize=16)
def gauss_legendre(k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(k)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class Observation:
    time: float
    status: int

    def __post_init__(self):
        if not np.isfinite(self.time) or self.time < 0:
            raise ValueError(f"time must be finite and >= 0, got {self.time}")
        if self.status not in (0, 1):
            raise ValueError(f"status must be 0 or 1, got {self.status}")


@dataclass(frozen=True)
class ExposureQuadrature:
    """
    Node set for integrals  int_a^b w(t) Y(t) f(t) dt.

    Each segment between consecutive order statistics carries the same
    number of Gauss-Legendre nodes; `weights` already include the
    segment half-length, Y on the segment and w at the node.
    """
    nodes: np.ndarray
    weights: np.ndarray
    nodes_per_segment: int
    segment_left: np.ndarray
    segment_right: np.ndarray
    segment_at_risk: np.ndarray

    @property
    def n_segments(self) -> int:
        return len(self.segment_left)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sum over nodes; `values` has the node axis first."""
        if self.n_segments == 0:
            return np.zeros(np.shape(values)[1:])
        return np.tensordot(self.weights, values, axes=(0, 0))

    def segment_integrals(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        weighted = values * self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        return weighted.reshape((self.n_segments, self.nodes_per_segment) + values.shape[1:]).sum(axis=1)


@dataclass(frozen=True, eq=False)
class SurvivalSample:
    """
    Censored observations (x_i, delta_i) sorted by time, observed on [0, T].

    Arrays are read-only; every query is a pure read, so one sample can be
    shared across threads.
    """
    times: np.ndarray
    statuses: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        statuses = np.asarray(self.statuses, dtype=np.int8)
        if times.ndim != 1 or times.shape != statuses.shape:
            raise ValueError("times and statuses must be 1-d arrays of equal length")
        if times.size == 0:
            raise ValueError("sample must contain at least one observation")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ValueError("times must be finite and nonnegative")
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted ascending")
        if not np.all((statuses == 0) | (statuses == 1)):
            raise ValueError("statuses must be 0 or 1")
        if not self.horizon > 0 or times[-1] > self.horizon:
            raise ValueError(f"horizon {self.horizon} must be positive and >= max time {times[-1]}")
        times.flags.writeable = False
        statuses.flags.writeable = False
        failures = times[statuses == 1]
        failures.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "statuses", statuses)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "_failures", failures)

    # ==========================================
    # Construction
    # ==========================================

    @classmethod
    def from_records(
        cls,
        times: Sequence[float],
        statuses: Sequence[int],
        horizon: Optional[float] = None,
    ) -> "SurvivalSample":
        times = np.asarray(times, dtype=float)
        statuses = np.asarray(statuses, dtype=np.int8)
        order = np.argsort(times, kind="stable")
        times, statuses = times[order], statuses[order]
        if horizon is None:
            horizon = float(times[-1]) if times.size else 0.0
        return cls(times=times, statuses=statuses, horizon=horizon)

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], horizon: Optional[float] = None):
        return cls.from_records(
            [o.time for o in observations], [o.status for o in observations], horizon=horizon
        )

    def to_json(self) -> str:
        from app.schemas.sample import SurvivalSampleModel
        return SurvivalSampleModel.from_sample(self).model_dump_json()

    @classmethod
    def from_json(cls, payload: str) -> "SurvivalSample":
        from app.schemas.sample import SurvivalSampleModel
        return SurvivalSampleModel.model_validate_json(payload).to_sample()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "status": self.statuses.astype(int)})

    # ==========================================
    # Basic properties
    # ==========================================

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def failure_times(self) -> np.ndarray:
        return self._failures

    @property
    def n_failures(self) -> int:
        return int(self._failures.size)

    @property
    def observations(self) -> Tuple[Observation, ...]:
        return tuple(Observation(float(t), int(d)) for t, d in zip(self.times, self.statuses))

    @property
    def max_time(self) -> float:
        return float(self.times[-1])

    # ==========================================
    # Counting / at-risk queries
    # ==========================================

    def at_risk(self, t):
        """Y(t) = #{x_i >= t}; vectorized over t."""
        counts = self.n - np.searchsorted(self.times, t, side="left")
        return int(counts) if np.ndim(counts) == 0 else counts

    def event_count(self, a: float, b: float) -> int:
        """Failures with time in (a, b]."""
        if a > b:
            raise ValueError(f"event_count needs a <= b, got ({a}, {b})")
        f = self._failures
        return int(np.searchsorted(f, b, side="right") - np.searchsorted(f, a, side="right"))

    def failures_in(self, a: float, b: float) -> np.ndarray:
        f = self._failures
        return f[np.searchsorted(f, a, side="right"):np.searchsorted(f, b, side="right")]

    def counting_process(self, t):
        """N(t) = #{x_i <= t, delta_i = 1}."""
        counts = np.searchsorted(self._failures, t, side="right")
        return int(counts) if np.ndim(counts) == 0 else counts

    # ==========================================
    # Exposure
    # ==========================================

    def segments(self, a: float, b: float, breakpoints: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Split [a, b] at the observation times (and extra breakpoints) into
        pieces on which Y is constant. Pieces with Y = 0 are dropped.
        Returns (left, right, Y).
        """
        if a > b:
            raise ValueError(f"interval needs a <= b, got ({a}, {b})")
        upper = min(b, self.max_time)
        if upper <= a:
            empty = np.empty(0)
            return empty, empty, np.empty(0, dtype=int)
        lo = np.searchsorted(self.times, a, side="right")
        hi = np.searchsorted(self.times, upper, side="left")
        inner = self.times[lo:hi]
        extra = [p for p in breakpoints if a < p < upper]
        if extra:
            inner = np.concatenate([inner, extra])
        edges = np.unique(np.concatenate([[a], inner, [upper]]))
        left, right = edges[:-1], edges[1:]
        return left, right, self.n - np.searchsorted(self.times, right, side="left")

    def quadrature(
        self,
        weight: WeightLike,
        a: float,
        b: float,
        nodes: Optional[int] = None,
    ) -> ExposureQuadrature:
        k = nodes or settings.QUADRATURE_NODES
        left, right, y = self.segments(a, b, getattr(weight, "breakpoints", ()))
        x, w = gauss_legendre(k)
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        base = (half[:, None] * w[None, :] * y[:, None]).ravel()
        if weight is None:
            g = np.ones_like(t)
        elif callable(weight):
            g = np.asarray(weight(t), dtype=float)
        else:
            g = np.full_like(t, float(weight))
        return ExposureQuadrature(
            nodes=t,
            weights=base * g,
            nodes_per_segment=k,
            segment_left=left,
            segment_right=right,
            segment_at_risk=y,
        )

    def exposure(self, weight: WeightLike, a: float, b: float) -> float:
        """
        int_a^b w(t) Y(t) dt as a sum over pieces between order statistics.

        Constant weights and polynomial weights (kernel weights) are
        integrated exactly; any other callable uses adaptive quadrature
        on each piece.
        """
        if weight is None or not callable(weight):
            c = 1.0 if weight is None else float(weight)
            left, right, y = self.segments(a, b)
            return float(c * np.sum(y * (right - left)))

        degree = getattr(weight, "polynomial_degree", None)
        if degree is not None and degree < 2 * settings.QUADRATURE_NODES:
            return float(np.sum(self.quadrature(weight, a, b).weights))

        left, right, y = self.segments(a, b, getattr(weight, "breakpoints", ()))
        total = 0.0
        for lo, hi, count in zip(left, right, y):
            value, _ = integrate.quad(lambda t: float(weight(t)), lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
            total += count * value
        return float(total)
