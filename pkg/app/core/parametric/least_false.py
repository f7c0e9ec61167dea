# app/core/parametric/least_false.py

import logging
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.data.sample import WeightLike, gauss_legendre
from app.core.data.simulation import SimulationLaw, as_vectorized
from app.core.parametric.families import HazardFamily
from app.core.parametric.fitting import FitResult, WindowObjective, describe_weight, maximize, weight_values

logger = logging.getLogger(__name__)


def population_objective(
    hazard: Callable,
    at_risk: Callable,
    family: HazardFamily,
    interval: Tuple[float, float],
    weight: WeightLike = None,
    pieces: int = 64,
    nodes: int = 16,
) -> WindowObjective:
    """
    int_a^b g y {alpha log alpha(., theta) - alpha(., theta)} dt on a
    composite Gauss-Legendre grid; kernel breakpoints split the pieces.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError(f"interval needs a < b, got ({a}, {b})")
    edges = np.linspace(a, b, pieces + 1)
    extra = [p for p in getattr(weight, "breakpoints", ()) if a < p < b]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    x, w = gauss_legendre(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    base = (half[:, None] * w[None, :]).ravel() * weight_values(weight, t) * np.asarray(at_risk(t), dtype=float)
    return WindowObjective(
        family=family,
        data_points=t,
        data_weights=base * np.asarray(hazard(t), dtype=float),
        comp_nodes=t,
        comp_weights=base,
        interval=(a, b),
        n_events=0,
    )


def least_false_parameter(
    truth: Union[SimulationLaw, Callable],
    family: HazardFamily,
    interval: Tuple[float, float],
    weight: WeightLike = None,
    at_risk: Optional[Callable] = None,
    init: Union[str, Sequence[float]] = "auto",
    fixed: Optional[Dict[int, float]] = None,
) -> FitResult:
    """
    theta_0 solving int_a^b g y psi(t, theta) {alpha(t) - alpha(t, theta)} dt = 0.

    `truth` is a SimulationLaw (hazard and y from the law) or a hazard
    with a `cumulative` method, in which case y = exp(-A) unless given.
    """
    if isinstance(truth, SimulationLaw):
        hazard = as_vectorized(truth.true_hazard)
        y = at_risk or truth.at_risk_fraction
    else:
        hazard = as_vectorized(truth)
        if at_risk is None:
            if not hasattr(truth, "cumulative"):
                raise ValueError("at_risk is required when the truth has no cumulative hazard")
            at_risk = lambda t: np.exp(-truth.cumulative(t))
        y = at_risk
    objective = population_objective(hazard, y, family, interval, weight)
    result = maximize(objective, init=init, fixed=fixed, weight_descr=describe_weight(weight))
    logger.debug(f"Least-false {family!r} on {interval}: {result.theta_hat}")
    return result
