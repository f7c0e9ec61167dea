# app/core/dynamic/bands.py

import math
from typing import Optional, Tuple

from scipy import stats

from app.core.dynamic.curve import CurvePoint
from app.core.smoothing.kernels import Kernel


def normal_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"band level must lie in (0, 1), got {level}")
    return float(stats.norm.ppf(0.5 + 0.5 * level))


def bias_shift(kernel: Kernel, h: float, b_hat: Optional[float]) -> float:
    """(1/2) beta_K h^2 b_hat(s); zero without a bias estimate or a finite window."""
    if b_hat is None or not math.isfinite(b_hat) or not math.isfinite(h):
        return 0.0
    return 0.5 * kernel.constants.beta_k * h * h * b_hat


def pointwise_band(
    point: CurvePoint,
    kernel: Kernel,
    level: float = 0.95,
    b_hat: Optional[float] = None,
) -> Tuple[float, float]:
    """
    alpha_hat - (1/2) beta_K h^2 b_hat  +-  z se, with z the (1 + level)/2
    standard normal quantile. Without b_hat the band is centred at alpha_hat.
    """
    z = normal_quantile(level)
    if not math.isfinite(point.se) or not math.isfinite(point.alpha_hat):
        return float("nan"), float("nan")
    center = point.alpha_hat - bias_shift(kernel, point.h_used, b_hat)
    half = z * point.se
    return center - half, center + half
