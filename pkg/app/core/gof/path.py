# app/core/gof/path.py

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.data.sample import SurvivalSample
from app.core.errors import NoEventsError
from app.core.parametric.families import HazardFamily
from app.core.parametric.fitting import FitResult, fit_weighted_mle

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DnPath:
    """
    Residual path on (a, b] of the model fitted to that interval.

    `values` is the unnormalized N(a, t] - int_a^t Y alpha_hat du at a, each
    distinct failure time x and its left limit x-, and b. For one-parameter
    families `weighted_values` carries the psi-weighted version. D_n is
    values / sqrt(n).
    """
    eval_points: np.ndarray
    values: np.ndarray
    left_limit: np.ndarray
    failure_times: np.ndarray
    failure_values: np.ndarray
    multiplicity: np.ndarray
    weighted_values: Optional[np.ndarray]
    tau2_hat: float
    n_ab: int
    n: int
    interval: Tuple[float, float]
    family: str
    product_form: bool
    fit: FitResult

    @property
    def dn(self) -> np.ndarray:
        return self.values / np.sqrt(self.n)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _compensator(sample: SurvivalSample, cumulative, a: float, t: np.ndarray) -> np.ndarray:
    """
    int_a^t Y(u) alpha(u) du = sum_{x_j > a} {Lambda(min(x_j, t)) - Lambda(a)},
    evaluated for sorted t by prefix sums over the observation times.
    """
    times = sample.times[np.searchsorted(sample.times, a, side="right"):]
    if times.size == 0:
        return np.zeros_like(t)
    lam_a = float(cumulative(np.array([a]))[0])
    excess = np.concatenate([[0.0], np.cumsum(cumulative(times) - lam_a)])
    below = np.searchsorted(times, t, side="left")
    still = times.size - below
    return excess[below] + still * (cumulative(t) - lam_a)


def dn_path(
    sample: SurvivalSample,
    family: HazardFamily,
    interval: Tuple[float, float],
    fit: Optional[FitResult] = None,
) -> DnPath:
    """Fits `family` on (a, b] with g = 1 (unless `fit` is given) and builds the residual path."""
    a, b = float(interval[0]), float(interval[1])
    n_ab = sample.event_count(a, b) if a <= b else 0
    if n_ab == 0:
        raise NoEventsError(f"no failures in ({a:g}, {b:g}]")

    local = family.localize(0.5 * (a + b))
    if fit is None:
        fit = fit_weighted_mle(sample, local, None, (a, b))
    theta = fit.theta_hat

    def cumulative(t):
        return local.cumulative(np.asarray(t, dtype=float), theta)

    fails, counts = np.unique(sample.failures_in(a, b), return_counts=True)
    points = np.concatenate([[a], np.repeat(fails, 2), [b]])
    left = np.zeros(points.size, dtype=bool)
    left[1:-1:2] = True

    # N(a, x-) counts failures strictly before x; N(a, x) includes x
    n_before = np.concatenate([[0], np.cumsum(counts)])
    counted = np.empty(points.size)
    counted[0] = 0.0
    counted[1:-1:2] = n_before[:-1]
    counted[2:-1:2] = n_before[1:]
    counted[-1] = n_ab

    comp = _compensator(sample, cumulative, a, points)
    values = counted - comp

    weighted = None
    tau2 = n_ab / sample.n
    if local.dim == 1:
        quad = sample.quadrature(None, a, b)
        alpha = local.hazard(quad.nodes, theta)
        psi = local.score(quad.nodes, theta)[:, 0]
        tau2 = float(quad.integrate(psi ** 2 * alpha)) / sample.n
        seg = quad.segment_integrals(psi * alpha) if quad.n_segments else np.zeros(0)
        cum_seg = np.concatenate([[0.0], np.cumsum(seg)])
        upto = np.searchsorted(quad.segment_right, points, side="right")
        psi_f = local.score(fails, theta)[:, 0] * counts
        cum_psi = np.concatenate([[0.0], np.cumsum(psi_f)])
        data = np.empty(points.size)
        data[0] = 0.0
        data[1:-1:2] = cum_psi[:-1]
        data[2:-1:2] = cum_psi[1:]
        data[-1] = cum_psi[-1]
        weighted = data - cum_seg[upto]

    return DnPath(
        eval_points=points,
        values=values,
        left_limit=left,
        failure_times=fails,
        failure_values=values[2:-1:2],
        multiplicity=counts,
        weighted_values=weighted,
        tau2_hat=tau2,
        n_ab=int(n_ab),
        n=sample.n,
        interval=(a, b),
        family=family.name,
        product_form=bool(local.profile_capable),
        fit=fit,
    )
