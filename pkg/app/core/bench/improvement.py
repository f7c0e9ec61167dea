# app/core/bench/improvement.py

import logging
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.data.simulation import SimulationLaw

logger = logging.getLogger(__name__)

IMPROVEMENT_TAGS = ("constant", "gompertz", "weibull", "frailty")

# |alpha''| below this (relative to alpha) counts as zero curvature
_FLAT = 1e-12


def _matched_curvature(tag: str, s: float, alpha: float, d1: float, exit_rate: float) -> float:
    """Second derivative at s of the local model that matches alpha and alpha' there."""
    if tag == "gompertz":
        return d1 ** 2 / alpha
    if tag == "weibull":
        if s <= 0:
            return float("nan")
        return d1 ** 2 / alpha - d1 / s
    if tag == "frailty":
        return 2.0 * d1 ** 2 / alpha
    # constant family: the kernel weight tilts by y, so -2 alpha' y'/y plays the part
    return 2.0 * d1 * exit_rate


def improvement_region(
    truth,
    family_tag: str,
    grid: Sequence[float],
    exit_rate: Optional[Callable] = None,
) -> pd.DataFrame:
    """
    Where the dynamic estimator with the given local family beats the
    smoothed Nelson-Aalen in leading-order bias: the ratio of the matched
    model curvature to alpha'' must lie in [0, 2]. For Gompertz this is
    alpha'^2/(alpha alpha''); it equals 1 for a Weibull truth under the
    Weibull tag. The constant tag needs the exit rate -y'/y, which
    defaults to alpha (no censoring).

    `truth` has __call__, d1 and d2, or is a SimulationLaw wrapping one.
    Returns s, criterion, flag with flag in {better, worse, indeterminate}.
    """
    tag = family_tag.lower()
    if tag not in IMPROVEMENT_TAGS:
        raise ValueError(f"improvement region covers tags {IMPROVEMENT_TAGS}, got '{family_tag}'")
    if isinstance(truth, SimulationLaw):
        law = truth
        truth = law.true_hazard
        if exit_rate is None:
            exit_rate = lambda s: np.asarray(truth(s), dtype=float) + np.asarray(law.censoring_rate(s), dtype=float)
    grid = np.asarray(grid, dtype=float)
    alpha = np.asarray(truth(grid), dtype=float)
    d1 = np.asarray(truth.d1(grid), dtype=float)
    d2 = np.asarray(truth.d2(grid), dtype=float)
    rate = alpha if exit_rate is None else np.asarray(exit_rate(grid), dtype=float)

    criterion = np.full(grid.size, np.nan)
    flags = []
    for i, s in enumerate(grid):
        if abs(d2[i]) <= _FLAT * max(1.0, abs(alpha[i])) or not alpha[i] > 0:
            flags.append("indeterminate")
            continue
        matched = _matched_curvature(tag, s, alpha[i], d1[i], rate[i])
        if not np.isfinite(matched):
            flags.append("indeterminate")
            continue
        criterion[i] = matched / d2[i]
        flags.append("better" if 0.0 <= criterion[i] <= 2.0 else "worse")
    logger.debug(f"Improvement region for '{tag}': {flags.count('better')} of {grid.size} points better")
    return pd.DataFrame({"s": grid, "criterion": criterion, "flag": flags})
