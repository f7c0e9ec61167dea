# app/core/dynamic/estimator.py

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import settings
from app.core.bandwidth.pilot import pilot_estimate
from app.core.bandwidth.plan import BandwidthPlan, PilotConfig
from app.core.bandwidth.plugin import pilot_bias_factor, plugin_global_c
from app.core.bandwidth.post_smooth import post_smooth
from app.core.data.sample import SurvivalSample
from app.core.dynamic.bands import pointwise_band
from app.core.dynamic.curve import CurvePoint, HazardCurve, sorted_points
from app.core.errors import (
    ConfigError,
    EmptyWindowError,
    HazardError,
    InsufficientWindowError,
    NoEventsError,
    PilotError,
    SingularMatrixError,
)
from app.core.gof.windows import StartupChoice, expand_window, startup_interval, window_bounds
from app.core.parametric.families import HazardFamily
from app.core.parametric.fitting import FitResult, fit_weighted_mle
from app.core.parametric.sandwich import sandwich
from app.core.smoothing.kernels import Kernel
from app.utils.logging import log_performance
from app.utils.metrics import curve_gaps_total

logger = logging.getLogger(__name__)

STARTUP_POLICIES = ("gof", "half_window", "none")
SE_MODES = ("formula", "sandwich")

# Slack when deciding whether a window pokes out of [0, T]
_BOUNDARY_SLACK = 1e-12


# ============================================
# FIT SETTINGS
# ============================================

@dataclass(frozen=True)
class LocalFitSpec:
    """
    Everything estimate_curve needs besides the data. `family` is the
    global form; each grid point fits family.localize(s).

    startup governs s < h/2 and, mirrored, s > T - h/2:
      gof          interval scan; the global fit on [0, b0] serves s <= b0
      half_window  alpha(s, theta_hat(h/2)) from the first full window
      none         truncated windows, no renormalization
    A slope window factor above 1 and/or a smoothing span turn on the
    two-pass fit: slopes from wider windows, then the level in closed form.
    """
    family: HazardFamily
    kernel: Kernel
    bandwidth: BandwidthPlan
    grid: Tuple[float, ...]
    min_events: int = field(default_factory=lambda: settings.MIN_EVENTS)
    startup: str = "gof"
    se_mode: str = "formula"
    band_level: float = 0.95
    bias_correction: bool = False
    slope_window_factor: float = 1.0
    slope_smooth_span: float = 0.0
    gof_kind: Optional[str] = None
    gof_level: Optional[float] = None
    threads: int = field(default_factory=lambda: settings.THREADS)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(s) for s in np.atleast_1d(self.grid)))

    def validate(self, horizon: Optional[float] = None) -> Tuple[bool, List[str]]:
        violations = []
        grid = np.asarray(self.grid)
        if grid.size == 0:
            violations.append("grid is empty")
        else:
            if np.any(np.diff(grid) <= 0):
                violations.append("grid must be strictly ascending")
            if np.any(grid < 0) or (horizon is not None and np.any(grid > horizon)):
                violations.append(f"grid must lie within [0, {horizon if horizon is not None else 'T'}]")
            if not np.all(np.isfinite(grid)):
                violations.append("grid values must be finite")
        if self.min_events < 1:
            violations.append("min_events must be >= 1")
        if self.startup not in STARTUP_POLICIES:
            violations.append(f"startup must be one of {', '.join(STARTUP_POLICIES)}")
        if self.se_mode not in SE_MODES:
            violations.append(f"se_mode must be one of {', '.join(SE_MODES)}")
        if not 0.0 < self.band_level < 1.0:
            violations.append("band level must lie in (0, 1)")
        if self.slope_window_factor < 1.0:
            violations.append("slope window factor must be >= 1")
        if self.slope_smooth_span < 0:
            violations.append("slope smoothing span must be >= 0")
        if self.threads < 1:
            violations.append("threads must be >= 1")
        ok, plan_violations = self.bandwidth.validate()
        violations.extend(plan_violations)
        return len(violations) == 0, violations

    @property
    def two_pass_slope(self) -> bool:
        return self.slope_window_factor > 1.0 or self.slope_smooth_span > 0

    def describe(self) -> Dict:
        return {
            "family": self.family.describe(),
            "kernel": self.kernel.name,
            "bandwidth": self.bandwidth.to_dict(),
            "grid": list(self.grid),
            "min_events": self.min_events,
            "startup": self.startup,
            "se_mode": self.se_mode,
            "band_level": self.band_level,
            "bias_correction": self.bias_correction,
            "slope_window_factor": self.slope_window_factor,
            "slope_smooth_span": self.slope_smooth_span,
            "gof_kind": self.gof_kind,
            "gof_level": self.gof_level,
        }


@dataclass(frozen=True, eq=False)
class LocalEstimate:
    """Unpacks as (theta_local, alpha_hat, se)."""
    theta_local: np.ndarray
    alpha_hat: float
    se: float
    fit: FitResult
    s: float
    h: float
    window: Tuple[float, float]

    def __iter__(self):
        return iter((self.theta_local, self.alpha_hat, self.se))


# ============================================
# SINGLE POINT
# ============================================

def _standard_error(sample, spec, local, weight, window, fit, s, h, alpha, fixed) -> float:
    if spec.se_mode == "formula":
        return math.sqrt(spec.kernel.constants.gamma_k * alpha / (h * sample.at_risk(s)))
    try:
        matrices = sandwich(sample, local, weight, window, fit.theta_hat)
    except SingularMatrixError as e:
        logger.warning(f"Sandwich at s={s:g} failed ({e}); standard error left undefined")
        return float("nan")
    if fixed:
        # level-only problem: M_11 / (n J_11^2)
        variance = matrices.m_hat[0, 0] / (sample.n * matrices.j_hat[0, 0] ** 2)
    else:
        variance = matrices.covariance[0, 0]
    return math.sqrt(max(float(variance), 0.0))


def fit_local_at(
    sample: SurvivalSample,
    spec: LocalFitSpec,
    s: float,
    h: float,
    fixed: Optional[Dict[int, float]] = None,
    init: Union[str, Sequence[float]] = "auto",
) -> LocalEstimate:
    """
    Maximizes the kernel-weighted likelihood on (s - h/2, s + h/2] within
    [0, T] and returns theta_hat(s), alpha_hat(s) = alpha(s, theta_hat(s))
    and its standard error, by default sqrt(gamma_K alpha_hat / (h Y(s))).
    """
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"bandwidth must be positive and finite, got {h}")
    a, b = window_bounds(s, h, sample.horizon)
    n_events = sample.event_count(a, b) if a < b else 0
    if n_events < spec.min_events:
        raise InsufficientWindowError(f"{n_events} failures in ({a:g}, {b:g}], need {spec.min_events}")
    if sample.at_risk(s) == 0:
        raise InsufficientWindowError(f"nobody at risk at s={s:g}")

    local = spec.family.localize(s)
    weight = spec.kernel.weight(s, h)
    fit = fit_weighted_mle(sample, local, weight, (a, b), init=init, fixed=fixed)
    alpha = float(local.hazard(np.array([s]), fit.theta_hat)[0])
    se = _standard_error(sample, spec, local, weight, (a, b), fit, s, h, alpha, fixed)
    return LocalEstimate(
        theta_local=fit.theta_hat, alpha_hat=alpha, se=se, fit=fit, s=float(s), h=float(h), window=(a, b),
    )


def local_constant(sample: SurvivalSample, kernel: Kernel, s: float, h: float) -> float:
    """sum K((x_i - s)/h) delta_i / int K((t - s)/h) Y(t) dt over the window."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    a, b = window_bounds(s, h, sample.horizon)
    exposure = sample.exposure(kernel.weight(s, h), a, b) if a < b else 0.0
    if not exposure > 0:
        raise InsufficientWindowError(f"zero weighted exposure around s={s:g}")
    x = sample.failures_in(a, b)
    return float(np.sum(kernel.evaluate((x - s) / h))) / exposure


# ============================================
# CURVE
# ============================================

def _map(fn: Callable, items: Sequence, threads: int) -> List:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _side(s: float, h: float, horizon: float) -> Optional[str]:
    slack = _BOUNDARY_SLACK * max(1.0, horizon)
    left_out = s - 0.5 * h < -slack
    right_out = s + 0.5 * h > horizon + slack
    if left_out and (not right_out or s <= 0.5 * horizon):
        return "left"
    return "right" if right_out else None


def _interval_point(sample, family: HazardFamily, fit: FitResult, s: float, flag: str, h_used: float) -> CurvePoint:
    """Value at s of a g = 1 fit of the global family on a boundary interval (or [0, T])."""
    theta = fit.theta_hat
    alpha = float(family.hazard(np.array([s]), theta)[0])
    if not (np.isfinite(alpha) and alpha > 0):
        return CurvePoint.gap(s, h_used, family.dim, "insufficient_window", fit.n_events)
    theta_local = family.local_parameters(theta, s)
    se = float("nan")
    try:
        local = family.localize(s)
        se = float(sandwich(sample, local, None, fit.interval, theta_local).standard_errors()[0])
    except (HazardError, ValueError) as e:
        logger.debug(f"No standard error for the {flag} point s={s:g}: {e}")
    return CurvePoint(
        s=float(s), alpha_hat=alpha, h_used=float(h_used), theta_local=theta_local, se=se, flag=flag,
        converged=fit.converged, n_events=fit.n_events, score_residual=fit.score_residual,
    )


def _regular_point(sample, spec, s, h, fixed=None, flag="") -> CurvePoint:
    estimate = fit_local_at(sample, spec, s, h, fixed=fixed)
    fit = estimate.fit
    if not fit.converged:
        point = CurvePoint.gap(s, h, spec.family.dim, "nonconverged", fit.n_events)
        point.score_residual = fit.score_residual
        return point
    return CurvePoint(
        s=float(s), alpha_hat=estimate.alpha_hat, h_used=float(h), theta_local=estimate.theta_local,
        se=estimate.se, flag=flag, converged=True, n_events=fit.n_events, score_residual=fit.score_residual,
    )


def _half_window_point(sample, spec, s, h, side) -> CurvePoint:
    T = sample.horizon
    anchor = min(0.5 * h, 0.5 * T) if side == "left" else max(T - 0.5 * h, 0.5 * T)
    estimate = fit_local_at(sample, spec, anchor, h)
    if not estimate.fit.converged:
        return CurvePoint.gap(s, h, spec.family.dim, "nonconverged", estimate.fit.n_events)
    local = spec.family.localize(anchor)
    alpha = float(local.hazard(np.array([s]), estimate.theta_local)[0])
    if not (np.isfinite(alpha) and alpha > 0):
        return CurvePoint.gap(s, h, spec.family.dim, "insufficient_window", estimate.fit.n_events)
    return CurvePoint(
        s=float(s), alpha_hat=alpha, h_used=float(h),
        theta_local=local.local_parameters(estimate.theta_local, s),
        se=estimate.se * alpha / estimate.alpha_hat,
        flag="startup" if side == "left" else "shutdown",
        converged=True, n_events=estimate.fit.n_events, score_residual=estimate.fit.score_residual,
    )


def _resolve_widths(sample, spec, grid) -> Tuple[np.ndarray, np.ndarray, BandwidthPlan]:
    """Window width per grid point (NaN: no feasible window) and the sentinel mask."""
    plan = spec.bandwidth
    sentinel = np.zeros(grid.size, dtype=bool)
    if plan.kind == "gof":
        def scan(s):
            try:
                return expand_window(sample, spec.family, s, spec.gof_kind, spec.gof_level, spec.min_events)
            except (InsufficientWindowError, NoEventsError, EmptyWindowError) as e:
                logger.debug(f"No window expansion at s={s:g}: {e}")
                return None
        choices = _map(scan, list(grid), spec.threads)
        raw = np.array([c.h if c is not None and not c.sentinel else np.nan for c in choices])
        sentinel = np.array([c is not None and c.sentinel for c in choices])
        widths = post_smooth(grid, raw, settings.GOF_SMOOTH_SPAN_FRACTION * sample.horizon)
        widths[sentinel] = np.inf
        return widths, sentinel, plan

    if plan.kind == "plugin" and not plan.is_resolved:
        plan = plugin_global_c(sample, spec.kernel, spec.family.tag, plan.pilot)
    return plan.h_at(sample.at_risk(grid)), sentinel, plan


def _startup(sample, spec, side) -> Optional[StartupChoice]:
    try:
        return startup_interval(sample, spec.family, spec.gof_kind, spec.gof_level, spec.min_events, side=side)
    except (InsufficientWindowError, NoEventsError, EmptyWindowError) as e:
        logger.warning(f"Startup scan ({side}) unavailable, using truncated windows: {e}")
        return None


def _slopes(sample, spec, grid, widths, usable) -> np.ndarray:
    """First pass: slope estimates from widened windows, optionally post-smoothed."""
    def slope(i):
        if not usable[i]:
            return np.nan
        h = min(widths[i] * spec.slope_window_factor, 2.0 * sample.horizon)
        try:
            estimate = fit_local_at(sample, spec, grid[i], h)
        except (HazardError, ValueError) as e:
            logger.debug(f"No slope at s={grid[i]:g}: {e}")
            return np.nan
        return float(estimate.theta_local[1]) if estimate.fit.converged else np.nan

    beta = np.array(_map(slope, list(range(grid.size)), spec.threads))
    if spec.slope_smooth_span > 0:
        beta = post_smooth(grid, beta, spec.slope_smooth_span)
    return beta


@log_performance()
def estimate_curve(sample: SurvivalSample, spec: LocalFitSpec) -> HazardCurve:
    """
    alpha_hat(s) = alpha(s, theta_hat(s)) over spec.grid. Points that cannot
    be estimated come back as flagged gaps; boundary points follow the
    startup policy.
    """
    ok, violations = spec.validate(sample.horizon)
    if not ok:
        raise ConfigError(violations)
    family = spec.family
    grid = np.asarray(spec.grid, dtype=float)
    T = sample.horizon

    # 1. Window widths
    widths, sentinel, plan = _resolve_widths(sample, spec, grid)
    at_risk = sample.at_risk(grid)
    finite = np.isfinite(widths) & (widths > 0)
    sides = [_side(s, h, T) if ok_h else None for s, h, ok_h in zip(grid, widths, finite)]

    # 2. Boundary intervals and the global fit
    left = right = None
    if spec.startup == "gof":
        if any(side == "left" for side in sides):
            left = _startup(sample, spec, "left")
        if any(side == "right" for side in sides):
            right = _startup(sample, spec, "right")
    global_fit = fit_weighted_mle(sample, family) if sentinel.any() else None

    # 3. Slopes for the two-pass fit
    slope_fit = spec.two_pass_slope and family.localize(0.5 * T).profile_capable
    beta = None
    if slope_fit:
        regular = np.array([finite[i] and at_risk[i] > 0 and (sides[i] is None or spec.startup == "none")
                            for i in range(grid.size)])
        beta = _slopes(sample, spec, grid, widths, regular)

    # 4. Points
    def estimate_point(i: int) -> CurvePoint:
        s, h, side = float(grid[i]), float(widths[i]), sides[i]
        if sentinel[i]:
            return _interval_point(sample, family, global_fit, s, "global", np.inf)
        if at_risk[i] == 0:
            return CurvePoint.gap(s, h, family.dim, "no_risk")
        if not finite[i]:
            return CurvePoint.gap(s, h, family.dim, "insufficient_window")
        try:
            if side == "left" and left is not None and s <= left.boundary:
                return _interval_point(sample, family, left.fit, s, "startup", left.boundary)
            if side == "right" and right is not None and s >= right.boundary:
                return _interval_point(sample, family, right.fit, s, "shutdown", T - right.boundary)
            if side is not None and spec.startup == "half_window":
                return _half_window_point(sample, spec, s, h, side)
            fixed = None
            if beta is not None and np.isfinite(beta[i]):
                fixed = {1: float(beta[i])}
            return _regular_point(sample, spec, s, h, fixed=fixed)
        except InsufficientWindowError:
            return CurvePoint.gap(s, h, family.dim, "insufficient_window", sample.event_count(*window_bounds(s, h, T)))
        except (EmptyWindowError, NoEventsError):
            return CurvePoint.gap(s, h, family.dim, "empty_window")
        except SingularMatrixError:
            return CurvePoint.gap(s, h, family.dim, "nonconverged")
        except ValueError as e:
            logger.debug(f"Point s={s:g} left undefined: {e}")
            return CurvePoint.gap(s, h, family.dim, "insufficient_window")

    points = sorted_points(_map(estimate_point, list(range(grid.size)), spec.threads))

    # 5. Bands
    b_hat = _band_bias(sample, spec, plan, grid) if spec.bias_correction else None
    for i, point in enumerate(points):
        if b_hat is not None and np.isfinite(b_hat[i]):
            point.bias_factor = float(b_hat[i])
        point.band_lo, point.band_hi = pointwise_band(point, spec.kernel, spec.band_level, point.bias_factor)
        if point.is_gap:
            curve_gaps_total.labels(flag=point.flag).inc()

    curve = HazardCurve(
        points=points,
        family=family.name,
        kernel=spec.kernel.name,
        param_names=family.localize(0.5 * T).param_names,
        plan=plan.to_dict(),
        startup_boundary=left.boundary if left is not None else None,
        shutdown_boundary=right.boundary if right is not None else None,
        metadata={"n": sample.n, "n_failures": sample.n_failures, "horizon": T,
                  "two_pass_slope": bool(slope_fit)},
    )
    gaps = curve.gaps()
    if gaps:
        logger.warning(f"Curve for {family.name} has gaps: {gaps}")
    logger.info(f"Estimated {family.name} curve on {grid.size} points with {plan.describe()} bandwidth")
    return curve


def _band_bias(sample, spec, plan, grid) -> Optional[np.ndarray]:
    try:
        pilot = pilot_estimate(sample, plan.pilot or PilotConfig())
    except PilotError as e:
        logger.warning(f"Band bias correction skipped: {e}")
        return None
    return pilot_bias_factor(pilot, spec.family.tag, grid)
