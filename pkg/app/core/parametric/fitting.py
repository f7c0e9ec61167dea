# app/core/parametric/fitting.py

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from app.config import settings
from app.core.data.sample import SurvivalSample, WeightLike
from app.core.errors import EmptyWindowError
from app.core.parametric.families import HazardFamily, check_theta
from app.utils.metrics import fit_iterations, local_fits_total

logger = logging.getLogger(__name__)

# Expansion steps allowed while bracketing a one-dimensional root
MAX_BRACKET_EXPANSIONS = 60


@dataclass
class FitResult:
    theta_hat: np.ndarray
    weight_descr: str
    converged: bool
    iterations: int
    score_residual: float
    family: str
    interval: Tuple[float, float]
    log_likelihood: float
    score: np.ndarray
    n_events: int
    weighted_events: float
    method: str
    active_bounds: Tuple[int, ...] = ()
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "theta_hat": [float(v) for v in self.theta_hat],
            "weight": self.weight_descr,
            "converged": self.converged,
            "iterations": self.iterations,
            "score_residual": float(self.score_residual),
            "family": self.family,
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "log_likelihood": float(self.log_likelihood),
            "n_events": self.n_events,
            "weighted_events": float(self.weighted_events),
            "method": self.method,
            "active_bounds": list(self.active_bounds),
            "warnings": list(self.warnings),
        }


def describe_weight(weight: WeightLike) -> str:
    if weight is None:
        return "g=1"
    if not callable(weight):
        return f"g={float(weight):g}"
    return str(weight) if hasattr(weight, "breakpoints") else getattr(weight, "__name__", repr(weight))


def weight_values(weight: WeightLike, t: np.ndarray) -> np.ndarray:
    if weight is None:
        return np.ones_like(t)
    if callable(weight):
        return np.asarray(weight(t), dtype=float)
    return np.full_like(t, float(weight))


# ============================================
# OBJECTIVE
# ============================================

@dataclass(frozen=True, eq=False)
class WindowObjective:
    """
    l(theta) = sum_i w_i log alpha(x_i, theta) - sum_k q_k alpha(t_k, theta)

    On data the first sum runs over failures with w_i = g(x_i) and the
    second is the g*Y quadrature of the compensator. The population
    version uses the same shape with w = g*y*alpha_true on a fine grid.
    """
    family: HazardFamily
    data_points: np.ndarray
    data_weights: np.ndarray
    comp_nodes: np.ndarray
    comp_weights: np.ndarray
    interval: Tuple[float, float]
    n_events: int

    @property
    def weighted_events(self) -> float:
        return float(np.sum(self.data_weights))

    def value(self, theta) -> float:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            data = self.data_weights @ self.family.log_hazard(self.data_points, theta)
            comp = self.comp_weights @ self.family.hazard(self.comp_nodes, theta)
        return float(data - comp)

    def evaluate(self, theta) -> Tuple[float, np.ndarray, np.ndarray]:
        """(l, U, H) at theta in one pass."""
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            psi_x = fam.score(self.data_points, theta)
            alpha_t = fam.hazard(self.comp_nodes, theta)
            psi_t = fam.score(self.comp_nodes, theta)
            qa = self.comp_weights * alpha_t
            value = float(self.data_weights @ fam.log_hazard(self.data_points, theta) - np.sum(qa))
            score = self.data_weights @ psi_x - qa @ psi_t
            hessian = (
                np.einsum("i,ijk->jk", self.data_weights, fam.hessian(self.data_points, theta))
                - np.einsum("i,ij,ik->jk", qa, psi_t, psi_t)
                - np.einsum("i,ijk->jk", qa, fam.hessian(self.comp_nodes, theta))
            )
        return value, score, 0.5 * (hessian + hessian.T)

    def score(self, theta) -> np.ndarray:
        return self.evaluate(theta)[1]

    def level_given(self, theta) -> float:
        """Closed-form level for families with alpha = level * gamma(t, rest)."""
        exposure = float(self.comp_weights @ self.family.gamma(self.comp_nodes, theta))
        if not exposure > 0:
            raise EmptyWindowError("zero weighted exposure")
        return self.weighted_events / exposure

    def profile_score(self, beta: float, level_index: int = 0, slope_index: int = 1) -> float:
        """d/d beta of l(level_hat(beta), beta) = U_beta at the profiled level."""
        theta = np.zeros(self.family.dim)
        theta[level_index] = 1.0
        theta[slope_index] = beta
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            gamma = self.family.gamma(self.comp_nodes, theta)
            exposure = float(self.comp_weights @ gamma)
            if not exposure > 0 or not np.isfinite(exposure):
                return np.nan
            level = self.weighted_events / exposure
            slope_x = self.family.score(self.data_points, theta)[:, slope_index]
            slope_t = self.family.score(self.comp_nodes, theta)[:, slope_index]
            return float(self.data_weights @ slope_x - level * (self.comp_weights * gamma) @ slope_t)

    def residual(self, theta, score, free: Sequence[int]) -> float:
        """max_j |U_j| * scale_j / sum(w); scale is |theta_j| for the level parameter, 1 otherwise."""
        if not free:
            return 0.0
        scale = np.ones(len(score))
        scale[self.family.level_index] = abs(theta[self.family.level_index])
        return float(np.max(np.abs(score[free]) * scale[free]) / self.weighted_events)


def _check_interval(sample: SurvivalSample, interval) -> Tuple[float, float]:
    if interval is None:
        return 0.0, sample.horizon
    a, b = float(interval[0]), float(interval[1])
    slack = 1e-12 * max(1.0, sample.horizon)
    if not (a < b and a >= -slack and b <= sample.horizon + slack):
        raise ValueError(f"interval ({a}, {b}] must be a nonempty part of [0, {sample.horizon}]")
    return max(a, 0.0), min(b, sample.horizon)


def weighted_objective(
    sample: SurvivalSample,
    family: HazardFamily,
    weight: WeightLike = None,
    interval: Optional[Tuple[float, float]] = None,
) -> WindowObjective:
    a, b = _check_interval(sample, interval)
    events = sample.failures_in(a, b)
    g = weight_values(weight, events)
    if events.size == 0:
        raise EmptyWindowError(f"no failures in ({a:g}, {b:g}]")
    if not np.sum(g) > 0:
        raise EmptyWindowError(f"weight vanishes on every failure in ({a:g}, {b:g}]")
    quad = sample.quadrature(weight, a, b)
    return WindowObjective(
        family=family,
        data_points=events,
        data_weights=g,
        comp_nodes=quad.nodes,
        comp_weights=quad.weights,
        interval=(a, b),
        n_events=int(events.size),
    )


# ============================================
# ONE-DIMENSIONAL ROOTS
# ============================================

class _Bracket(NamedTuple):
    lo: float
    hi: float
    at_bound: bool


def _bracket_decreasing(f, x0: float, lower: Tuple[float, bool], step: float) -> Optional[_Bracket]:
    """Brackets the root of a decreasing function starting from x0."""
    bound, inclusive = lower
    f0 = f(x0)
    if not np.isfinite(f0):
        return None
    if f0 == 0:
        return _Bracket(x0, x0, False)
    if f0 > 0:
        lo = x0
        for _ in range(MAX_BRACKET_EXPANSIONS):
            hi = lo + step
            fh = f(hi)
            if not np.isfinite(fh):
                return None
            if fh <= 0:
                return _Bracket(lo, hi, False)
            lo, step = hi, 2.0 * step
        return None
    if inclusive and x0 == bound:
        return _Bracket(bound, bound, True)
    hi = x0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        cand = hi - step
        if cand <= bound:
            cand = bound if inclusive else bound + 0.5 * (hi - bound)
        fc = f(cand)
        if not np.isfinite(fc):
            return None
        if fc >= 0:
            return _Bracket(cand, hi, False)
        if inclusive and cand == bound:
            return _Bracket(bound, bound, True)
        hi, step = cand, 2.0 * step
    return None


def _solve_decreasing(f, x0, lower, step, max_iterations) -> Tuple[float, int, bool, bool]:
    """(root, iterations, converged, at_bound)"""
    bracket = _bracket_decreasing(f, x0, lower, step)
    if bracket is None:
        return x0, 0, False, False
    if bracket.lo == bracket.hi:
        return bracket.lo, 0, True, bracket.at_bound
    root, info = optimize.brentq(
        f, bracket.lo, bracket.hi,
        xtol=1e-14, rtol=4 * np.finfo(float).eps,
        maxiter=max_iterations, full_output=True, disp=False,
    )
    return float(root), int(info.iterations), bool(info.converged), False


# ============================================
# OPTIMIZER
# ============================================

def _initial_theta(objective: WindowObjective, init, fixed: Dict[int, float]) -> np.ndarray:
    family = objective.family
    if isinstance(init, str):
        if init != "auto":
            raise ValueError(f"init must be a parameter vector or 'auto', got '{init}'")
        theta = family.auto_init(1.0)
        for j, v in fixed.items():
            theta[j] = v
        if family.level_index not in fixed:
            if family.level_factor:
                theta[family.level_index] = objective.level_given(theta)
            else:
                theta[family.level_index] = objective.weighted_events / float(np.sum(objective.comp_weights))
    else:
        theta = check_theta(family, init).copy()
        for j, v in fixed.items():
            theta[j] = v
    if not family.is_feasible(theta):
        raise ValueError(f"initial parameter {theta} outside the {family.name} domain")
    return theta


def _newton(objective: WindowObjective, theta: np.ndarray, free: List[int], tolerance: float,
            max_iterations: int, warnings: List[str]) -> Tuple[np.ndarray, int, bool]:
    """Damped Newton on the free coordinates with step halving."""
    family = objective.family
    for iteration in range(1, max_iterations + 1):
        value, score, hessian = objective.evaluate(theta)
        if objective.residual(theta, score, free) <= tolerance:
            return theta, iteration - 1, True
        grad = score[free]
        hess = hessian[np.ix_(free, free)]
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = grad.copy()
        # Fall back to the gradient when the hessian is not negative definite here
        if not np.all(np.isfinite(step)) or step @ grad <= 0:
            step = grad / max(1.0, float(np.max(np.abs(hess))))

        t = 1.0
        while t > 1e-12:
            cand = theta.copy()
            cand[free] = theta[free] + t * step
            if family.is_feasible(cand):
                cand_value = objective.value(cand)
                if np.isfinite(cand_value) and cand_value >= value - 1e-12 * abs(value):
                    break
            elif "step halved at the parameter domain boundary" not in warnings:
                warnings.append("step halved at the parameter domain boundary")
            t *= 0.5
        else:
            logger.warning(f"Newton line search stalled for {family!r} at {theta}")
            return theta, iteration, False
        theta = cand
    _, score, _ = objective.evaluate(theta)
    return theta, max_iterations, objective.residual(theta, score, free) <= tolerance


def maximize(
    objective: WindowObjective,
    init: Union[str, Sequence[float]] = "auto",
    fixed: Optional[Dict[int, float]] = None,
    tolerance: Optional[float] = None,
    max_iterations: Optional[int] = None,
    weight_descr: str = "g=1",
) -> FitResult:
    family = objective.family
    tolerance = tolerance or settings.FIT_TOLERANCE
    max_iterations = max_iterations or settings.FIT_MAX_ITERATIONS
    fixed = {int(j): float(v) for j, v in (fixed or {}).items()}
    if any(j < 0 or j >= family.dim for j in fixed):
        raise ValueError(f"fixed indices {sorted(fixed)} out of range for {family.name}")

    theta = _initial_theta(objective, init, fixed)
    free = [j for j in range(family.dim) if j not in fixed]
    level = family.level_index
    bounds = family.lower_bounds()
    warnings: List[str] = []
    active: Tuple[int, ...] = ()
    iterations, solved = 0, True

    if not free:
        method = "fixed"
    elif family.level_factor and free == [level]:
        method = "closed_form"
        theta[level] = objective.level_given(theta)
    elif family.profile_capable and len(free) == 2:
        # Profile out the level; the profile in the slope is concave
        method = "profile"
        slope = 1 - level
        width = objective.interval[1] - objective.interval[0]
        beta, iterations, solved, at_bound = _solve_decreasing(
            lambda b: objective.profile_score(b, level, slope),
            theta[slope], bounds[slope], 1.0 / width, max_iterations,
        )
        theta[slope] = beta
        theta[level] = objective.level_given(theta)
        if at_bound:
            active = (slope,)
            warnings.append(f"{family.param_names[slope]} held at its bound {beta:g} (KKT)")
    elif len(free) == 1:
        method = "bracketed"
        j = free[0]

        def coordinate_score(x):
            cand = theta.copy()
            cand[j] = x
            if not family.is_feasible(cand):
                return np.nan
            return objective.score(cand)[j]

        step = abs(theta[j]) if j == level else 1.0
        theta[j], iterations, solved, at_bound = _solve_decreasing(
            coordinate_score, theta[j], bounds[j], step, max_iterations,
        )
        if at_bound:
            active = (j,)
    else:
        method = "newton"
        theta, iterations, solved = _newton(objective, theta, free, tolerance, max_iterations, warnings)

    value, score, _ = objective.evaluate(theta)
    checked = [j for j in free if j not in active]
    residual = objective.residual(theta, score, checked)
    converged = bool(solved and np.isfinite(value) and residual <= tolerance)

    outcome = "converged" if converged else "nonconverged"
    local_fits_total.labels(family=family.name, outcome=outcome).inc()
    fit_iterations.observe(iterations)
    if not converged:
        logger.warning(
            f"Fit of {family!r} on {objective.interval} did not converge "
            f"(method={method}, residual={residual:.3e}, iterations={iterations})"
        )

    return FitResult(
        theta_hat=theta,
        weight_descr=weight_descr,
        converged=converged,
        iterations=iterations,
        score_residual=residual,
        family=family.name,
        interval=objective.interval,
        log_likelihood=value,
        score=score,
        n_events=objective.n_events,
        weighted_events=objective.weighted_events,
        method=method,
        active_bounds=active,
        warnings=warnings,
    )


def fit_weighted_mle(
    sample: SurvivalSample,
    family: HazardFamily,
    weight: WeightLike = None,
    interval: Optional[Tuple[float, float]] = None,
    init: Union[str, Sequence[float]] = "auto",
    fixed: Optional[Dict[int, float]] = None,
    tolerance: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> FitResult:
    """
    Maximizes int_a^b g(t) {log alpha(t, theta) dN(t) - Y(t) alpha(t, theta) dt}.

    The event term is an exact sum over failures in (a, b]; the compensator
    uses the between-order-statistic quadrature of the sample.
    """
    objective = weighted_objective(sample, family, weight, interval)
    return maximize(
        objective, init=init, fixed=fixed, tolerance=tolerance,
        max_iterations=max_iterations, weight_descr=describe_weight(weight),
    )
