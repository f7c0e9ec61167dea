# app/core/bench/experiment.py

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from app.config import settings
from app.core.bandwidth.plan import BandwidthPlan
from app.core.bandwidth.plugin import plugin_global_c
from app.core.data.sample import SurvivalSample
from app.core.data.simulation import SimulationLaw, as_vectorized, derive_seed, simulate
from app.core.dynamic.bias import bias_factor
from app.core.dynamic.estimator import STARTUP_POLICIES, LocalFitSpec, estimate_curve
from app.core.errors import ConfigError, HazardError
from app.core.gof.path import dn_path
from app.core.gof.statistics import GOF_KINDS, gof_statistic, threshold_for
from app.core.parametric.families import HazardFamily, get_family
from app.core.parametric.fitting import fit_weighted_mle
from app.core.smoothing.kernels import get_kernel
from app.core.smoothing.nelson_aalen import smoothed_hazard
from app.utils.logging import log_performance
from app.utils.metrics import replications_total

logger = logging.getLogger(__name__)

ESTIMATOR_KINDS = ("dynamic", "smoothed_na", "parametric")
METRICS = ("mean", "bias", "variance", "mse", "theory_bias", "theory_variance", "failures")


# ============================================
# CONFIGURATION
# ============================================

@dataclass(frozen=True)
class EstimatorConfig:
    """
    One competitor in an experiment.
      dynamic      estimate_curve with the named family, kernel and plan
      smoothed_na  kernel-smoothed Nelson-Aalen with the same plan
      parametric   global g = 1 fit of the family on [0, T]
    """
    label: str
    kind: str = "dynamic"
    family: str = "constant"
    kernel: str = settings.DEFAULT_KERNEL
    bandwidth: str = "fixed:0.5"
    startup: str = "none"
    min_events: int = field(default_factory=lambda: settings.MIN_EVENTS)
    slope_window_factor: float = 1.0
    slope_smooth_span: float = 0.0

    def validate(self) -> Tuple[bool, List[str]]:
        violations = []
        if self.kind not in ESTIMATOR_KINDS:
            violations.append(f"estimator '{self.label}': kind must be one of {', '.join(ESTIMATOR_KINDS)}")
        try:
            get_family(self.family)
        except ValueError as e:
            violations.append(f"estimator '{self.label}': {e}")
        try:
            get_kernel(self.kernel)
        except HazardError as e:
            violations.append(f"estimator '{self.label}': {e}")
        try:
            plan = BandwidthPlan.parse(self.bandwidth)
            if self.kind == "smoothed_na" and plan.kind == "gof":
                violations.append(f"estimator '{self.label}': the smoothed Nelson-Aalen takes no gof bandwidth")
        except ConfigError as e:
            violations.extend(f"estimator '{self.label}': {v}" for v in e.violations)
        if self.startup not in STARTUP_POLICIES:
            violations.append(f"estimator '{self.label}': startup must be one of {', '.join(STARTUP_POLICIES)}")
        if self.min_events < 1:
            violations.append(f"estimator '{self.label}': min_events must be >= 1")
        return len(violations) == 0, violations

    @property
    def plan(self) -> BandwidthPlan:
        return BandwidthPlan.parse(self.bandwidth)

    @property
    def hazard_family(self) -> HazardFamily:
        return get_family(self.family)

    def to_spec(self, grid: Sequence[float], threads: int = 1) -> LocalFitSpec:
        return LocalFitSpec(
            family=self.hazard_family,
            kernel=get_kernel(self.kernel),
            bandwidth=self.plan,
            grid=tuple(grid),
            min_events=self.min_events,
            startup=self.startup,
            slope_window_factor=self.slope_window_factor,
            slope_smooth_span=self.slope_smooth_span,
            threads=threads,
        )

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "family": self.family,
            "kernel": self.kernel,
            "bandwidth": self.bandwidth,
            "startup": self.startup,
            "min_events": self.min_events,
            "slope_window_factor": self.slope_window_factor,
            "slope_smooth_span": self.slope_smooth_span,
        }


@dataclass(frozen=True)
class Experiment:
    """Monte Carlo design: law, sample size, replications, competitors and the weight w(s) of the ISE."""
    law: SimulationLaw
    n: int
    replications: int
    estimators: Tuple[EstimatorConfig, ...]
    grid: Tuple[float, ...]
    seed: int = 0
    weight: Optional[Callable] = None
    name: str = "experiment"

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "grid", tuple(float(s) for s in self.grid))

    def validate(self) -> Tuple[bool, List[str]]:
        violations = []
        if self.replications < 1:
            violations.append("replications must be >= 1")
        if self.n < 1:
            violations.append("n must be >= 1")
        if not self.estimators:
            violations.append("at least one estimator is required")
        labels = [e.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            violations.append("estimator labels must be unique")
        grid = np.asarray(self.grid)
        if grid.size == 0:
            violations.append("grid is empty")
        elif np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > self.law.horizon:
            violations.append(f"grid must be ascending within [0, {self.law.horizon:g}]")
        for estimator in self.estimators:
            violations.extend(estimator.validate()[1])
        return len(violations) == 0, violations


# ============================================
# REPORT
# ============================================

@dataclass(eq=False)
class McReport:
    """
    `estimates` is (replications, estimators, grid); `ise` holds each
    replication's integrated weighted squared error per estimator.
    `table` has one row per (estimator, s) with the empirical and
    theoretical columns; mse = bias^2 + variance per cell.
    """
    name: str
    labels: Tuple[str, ...]
    grid: np.ndarray
    truth: np.ndarray
    estimates: np.ndarray
    ise: np.ndarray
    table: pd.DataFrame
    failures: Dict[str, int]
    n: int
    seed: int

    @property
    def replications(self) -> int:
        return int(self.estimates.shape[0])

    def integrated_mse(self) -> pd.DataFrame:
        rows = []
        for j, label in enumerate(self.labels):
            values = self.ise[:, j]
            ok = values[np.isfinite(values)]
            mean = float(np.mean(ok)) if ok.size else float("nan")
            se = float(np.std(ok, ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else float("nan")
            rows.append({"estimator": label, "imse": mean, "mc_se": se, "replications": int(ok.size),
                         "failures": self.failures.get(label, 0)})
        return pd.DataFrame(rows)

    def to_long_frame(self) -> pd.DataFrame:
        """estimator, s, metric, value"""
        long = self.table.melt(id_vars=["estimator", "s"], value_vars=list(METRICS),
                               var_name="metric", value_name="value")
        return long.sort_values(["estimator", "metric", "s"], kind="mergesort").reset_index(drop=True)

    def summary(self) -> Dict:
        return {
            "name": self.name,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "estimators": list(self.labels),
            "integrated_mse": self.integrated_mse().to_dict(orient="records"),
            "failures": dict(self.failures),
        }


# ============================================
# RUNNERS
# ============================================

def run_estimator(sample: SurvivalSample, config: EstimatorConfig, grid: Sequence[float]) -> np.ndarray:
    """alpha_hat on the grid for one configured estimator; gaps are NaN."""
    grid = np.asarray(grid, dtype=float)
    if config.kind == "dynamic":
        return estimate_curve(sample, config.to_spec(grid)).alpha_hat
    if config.kind == "parametric":
        family = config.hazard_family
        fit = fit_weighted_mle(sample, family)
        return family.hazard(grid, fit.theta_hat)

    kernel = get_kernel(config.kernel)
    plan = config.plan
    if plan.kind == "plugin":
        plan = plugin_global_c(sample, kernel, "nelson_aalen", plan.pilot)
    widths = plan.h_at(sample.at_risk(grid))
    return np.array([
        smoothed_hazard(sample, kernel, h, s) if np.isfinite(h) else np.nan
        for s, h in zip(grid, widths)
    ])


def _theory(exp: Experiment, config: EstimatorConfig, grid: np.ndarray, alpha: np.ndarray,
            y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(1/2) beta_K h^2 b(s) and gamma_K alpha / (n h y) from the true law; NaN where undefined."""
    nan = np.full(grid.size, np.nan)
    if config.kind == "parametric":
        return nan, nan
    constants = get_kernel(config.kernel).constants
    plan = config.plan
    if plan.kind == "fixed":
        h = np.full(grid.size, plan.h_fixed)
    elif plan.kind == "adaptive":
        with np.errstate(divide="ignore"):
            h = plan.c * (exp.n * y) ** -0.2
    else:
        return nan, nan
    with np.errstate(divide="ignore", invalid="ignore"):
        variance = constants.gamma_k * alpha / (exp.n * h * y)

    truth = exp.law.true_hazard
    if not (hasattr(truth, "d1") and hasattr(truth, "d2")):
        return nan, variance
    tag = "nelson_aalen" if config.kind == "smoothed_na" else config.hazard_family.tag
    exit_rate = alpha + np.asarray(exp.law.censoring_rate(grid), dtype=float)
    d1, d2 = np.asarray(truth.d1(grid), dtype=float), np.asarray(truth.d2(grid), dtype=float)
    b = np.full(grid.size, np.nan)
    for i, s in enumerate(grid):
        try:
            b[i] = bias_factor(tag, alpha[i], d1[i], d2[i], 1.0, -exit_rate[i], s).value
        except ValueError:
            pass
    return 0.5 * constants.beta_k * h ** 2 * b, variance


def _ise(estimates: np.ndarray, truth: np.ndarray, grid: np.ndarray, w: np.ndarray) -> float:
    err = w * (estimates - truth) ** 2
    if not np.all(np.isfinite(err)):
        return float("nan")
    if grid.size == 1:
        return float(err[0])
    return float(integrate.trapezoid(err, grid))


@log_performance()
def run_experiment(exp: Experiment, threads: Optional[int] = None) -> McReport:
    """
    Replication r draws its sample with seed derive_seed(exp.seed, r) and
    runs every estimator on it. A failing estimator leaves NaN for that
    replication and is counted; the experiment carries on.
    """
    ok, violations = exp.validate()
    if not ok:
        raise ConfigError(violations)
    threads = threads or settings.THREADS
    grid = np.asarray(exp.grid, dtype=float)
    alpha = np.asarray(as_vectorized(exp.law.true_hazard)(grid), dtype=float)
    y = np.asarray(exp.law.at_risk_fraction(grid), dtype=float)
    w = np.ones_like(grid) if exp.weight is None else np.asarray(as_vectorized(exp.weight)(grid), dtype=float)
    labels = tuple(e.label for e in exp.estimators)

    def replicate(r: int) -> Tuple[np.ndarray, List[bool]]:
        sample = simulate(exp.law, exp.n, seed=derive_seed(exp.seed, r))
        rows, failed = [], []
        for config in exp.estimators:
            try:
                rows.append(run_estimator(sample, config, grid))
                failed.append(False)
            except (HazardError, ValueError) as e:
                logger.warning(f"Replication {r}: estimator '{config.label}' failed: {e}")
                rows.append(np.full(grid.size, np.nan))
                failed.append(True)
        replications_total.labels(outcome="failed" if any(failed) else "ok").inc()
        return np.vstack(rows), failed

    if threads > 1 and exp.replications > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(replicate, range(exp.replications)))
    else:
        results = [replicate(r) for r in range(exp.replications)]

    estimates = np.stack([values for values, _ in results])
    failures = {label: int(sum(failed[j] for _, failed in results)) for j, label in enumerate(labels)}
    ise = np.array([[_ise(estimates[r, j], alpha, grid, w) for j in range(len(labels))]
                    for r in range(exp.replications)])

    # 1. Per-cell moments
    frames = []
    for j, config in enumerate(exp.estimators):
        cell = estimates[:, j, :]
        count = np.sum(np.isfinite(cell), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(count > 0, np.nansum(cell, axis=0) / np.maximum(count, 1), np.nan)
            dev = np.where(np.isfinite(cell), cell - mean, 0.0)
            variance = np.where(count > 0, np.sum(dev ** 2, axis=0) / np.maximum(count, 1), np.nan)
        bias = mean - alpha
        theory_bias, theory_variance = _theory(exp, config, grid, alpha, y)
        frames.append(pd.DataFrame({
            "estimator": config.label,
            "s": grid,
            "truth": alpha,
            "mean": mean,
            "bias": bias,
            "variance": variance,
            "mse": bias ** 2 + variance,
            "theory_bias": theory_bias,
            "theory_variance": theory_variance,
            "failures": exp.replications - count,
        }))
    table = pd.concat(frames, ignore_index=True)
    logger.info(f"Experiment '{exp.name}': {exp.replications} replications of n={exp.n}, "
                f"{len(labels)} estimators, failures {failures}")
    return McReport(
        name=exp.name, labels=labels, grid=grid, truth=alpha, estimates=estimates, ise=ise,
        table=table, failures=failures, n=exp.n, seed=exp.seed,
    )


# ============================================
# GOF LEVEL STUDY
# ============================================

@log_performance()
def gof_level_study(
    law: SimulationLaw,
    family: HazardFamily,
    interval: Tuple[float, float],
    n: int,
    replications: int,
    kinds: Optional[Sequence[str]] = None,
    level: float = 0.10,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Empirical rejection rates of the interval tests on data from `law`.
    Kinds that do not apply to the family are left out.
    """
    kinds = tuple(kinds or GOF_KINDS)
    unknown = [k for k in kinds if k not in GOF_KINDS]
    if unknown:
        raise ConfigError([f"unknown statistic '{k}'" for k in unknown])
    rejections = {k: 0 for k in kinds}
    applicable = set(kinds)
    for r in range(replications):
        sample = simulate(law, n, seed=derive_seed(seed, r))
        path = dn_path(sample, family, interval)
        for kind in list(applicable):
            try:
                rejections[kind] += int(gof_statistic(path, kind, level).reject)
            except ValueError as e:
                logger.debug(f"Statistic {kind} skipped for {family.name}: {e}")
                applicable.discard(kind)
        replications_total.labels(outcome="ok").inc()
    rows = [
        {"kind": k, "level": level, "threshold": threshold_for(k, level), "rejections": rejections[k],
         "replications": replications, "rate": rejections[k] / replications}
        for k in kinds if k in applicable
    ]
    return pd.DataFrame(rows)
