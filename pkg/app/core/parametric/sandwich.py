# app/core/parametric/sandwich.py

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.config import settings
from app.core.data.sample import ExposureQuadrature, SurvivalSample, WeightLike, gauss_legendre
from app.core.errors import SingularMatrixError
from app.core.parametric.families import HazardFamily, check_theta
from app.core.parametric.fitting import weight_values, weighted_objective

logger = logging.getLogger(__name__)

MAX_CONDITION_NUMBER = 1e12


class ResidualPath:
    """
    E_hat(t) = n^-1 [ sum_{a < x_i <= t} g psi(x_i) - int_a^t g Y psi alpha(., theta) du ],
    the empirical E_g path. Vanishes at a and, at a root of the score, at b.
    """

    def __init__(self, sample: SurvivalSample, family: HazardFamily, weight: WeightLike,
                 quad: ExposureQuadrature, events: np.ndarray, event_weights: np.ndarray,
                 theta: np.ndarray, interval: Tuple[float, float]):
        self.n = sample.n
        self.family = family
        self.weight = weight
        self.theta = theta
        self.interval = interval
        self.quad = quad
        self.events = events
        p = family.dim
        jumps = event_weights[:, None] * family.score(events, theta)
        self._data = np.vstack([np.zeros((1, p)), np.cumsum(jumps, axis=0)])
        integrand = family.score(quad.nodes, theta) * family.hazard(quad.nodes, theta)[:, None]
        if quad.n_segments:
            seg = quad.segment_integrals(integrand)
        else:
            seg = np.zeros((0, p))
        self._comp = np.vstack([np.zeros((1, p)), np.cumsum(seg, axis=0)])

    def _partial(self, left: np.ndarray, t: np.ndarray, at_risk: np.ndarray) -> np.ndarray:
        x, w = gauss_legendre(self.quad.nodes_per_segment)
        half = 0.5 * (t - left)
        u = (left + half)[:, None] + half[:, None] * x[None, :]
        flat = u.ravel()
        values = (self.family.score(flat, self.theta) * self.family.hazard(flat, self.theta)[:, None]
                  * weight_values(self.weight, flat)[:, None])
        values = values.reshape(u.shape + (self.family.dim,))
        return np.einsum("mk,mkp->mp", (half * at_risk)[:, None] * w[None, :], values)

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.interval
        out = np.zeros((t.size, self.family.dim))
        inside = t > a
        if np.any(inside):
            tt = np.minimum(t[inside], b)
            data = self._data[np.searchsorted(self.events, tt, side="right")]
            comp = np.zeros_like(data)
            if self.quad.n_segments:
                left, right = self.quad.segment_left, self.quad.segment_right
                j = np.clip(np.searchsorted(left, tt, side="right") - 1, 0, len(left) - 1)
                upto = np.clip(tt, left[j], right[j])
                comp = self._comp[j] + self._partial(left[j], upto, self.quad.segment_at_risk[j])
            out[inside] = (data - comp) / self.n
        return out[0] if scalar else out


@dataclass
class SandwichMatrices:
    j_hat: np.ndarray
    m_hat: np.ndarray
    covariance: np.ndarray
    e_path: ResidualPath
    condition_number: float

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def sandwich(
    sample: SurvivalSample,
    family: HazardFamily,
    weight: WeightLike,
    interval: Optional[Tuple[float, float]],
    theta_hat,
) -> SandwichMatrices:
    """
    Empirical J_g^-1 M_g J_g^-1 / n at theta_hat.

    J_hat = -H(theta_hat)/n. M_hat = n^-1 sum g^2 psi psi' over failures plus
    int_a^b g alpha(., theta_hat) {psi E' + E psi'} dt with E the residual path.
    """
    theta = check_theta(family, theta_hat)
    objective = weighted_objective(sample, family, weight, interval)
    a, b = objective.interval
    n = sample.n

    _, _, hessian = objective.evaluate(theta)
    j_hat = -hessian / n
    condition = float(np.linalg.cond(j_hat))
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularMatrixError(condition)

    g = objective.data_weights
    psi_x = family.score(objective.data_points, theta)
    direct = np.einsum("i,ij,ik->jk", g ** 2, psi_x, psi_x) / n

    quad = sample.quadrature(weight, a, b, nodes=settings.QUADRATURE_NODES)
    path = ResidualPath(sample, family, weight, quad, objective.data_points, g, theta, (a, b))
    cross = np.zeros_like(direct)
    if quad.n_segments:
        # quadrature weights carry g*Y; the cross term is a plain dt integral
        lebesgue = quad.weights / np.repeat(quad.segment_at_risk, quad.nodes_per_segment)
        psi_t = family.score(quad.nodes, theta)
        e_t = path(quad.nodes)
        w = lebesgue * family.hazard(quad.nodes, theta)
        outer = np.einsum("i,ij,ik->jk", w, psi_t, e_t)
        cross = outer + outer.T
    m_hat = direct + cross

    j_inv = np.linalg.inv(j_hat)
    covariance = j_inv @ m_hat @ j_inv / n
    covariance = 0.5 * (covariance + covariance.T)
    logger.debug(f"Sandwich for {family!r} on ({a:g}, {b:g}]: cond(J)={condition:.3e}")
    return SandwichMatrices(
        j_hat=0.5 * (j_hat + j_hat.T),
        m_hat=0.5 * (m_hat + m_hat.T),
        covariance=covariance,
        e_path=path,
        condition_number=condition,
    )
