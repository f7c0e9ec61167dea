# app/core/bandwidth/plugin.py

import logging
from typing import Optional

import numpy as np
from scipy import integrate

from app.config import settings
from app.core.bandwidth.pilot import pilot_estimate
from app.core.bandwidth.plan import BandwidthPlan, PilotConfig
from app.core.data.sample import SurvivalSample
from app.core.dynamic.bias import bias_factor
from app.core.errors import PilotError
from app.core.smoothing.kernels import Kernel
from app.core.smoothing.nelson_aalen import nelson_aalen
from app.utils.logging import log_performance

logger = logging.getLogger(__name__)

PLUGIN_TAGS = ("constant", "gompertz", "weibull", "frailty", "nelson_aalen")
WEIGHT_CHOICES = ("y45", "uniform")
ADJUSTMENT_LABEL = "variance-subtraction estimate of the roughness bias (stand-in)"


def pilot_bias_factor(pilot, family_tag: str, s) -> np.ndarray:
    """b_hat(s) from pilot derivatives; NaN where the pilot is undefined."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    alpha, d1, d2 = pilot.alpha(s), pilot.d1(s), pilot.d2(s)
    exit_rate = pilot.exit_rate(s)
    out = np.full(s.shape, np.nan)
    for i in range(s.size):
        if not alpha[i] > 0 or (family_tag == "weibull" and s[i] <= 0):
            continue
        out[i] = bias_factor(family_tag, alpha[i], d1[i], d2[i], 1.0, -exit_rate[i], s[i]).value
    return out


@log_performance()
def plugin_global_c(
    sample: SurvivalSample,
    kernel: Kernel,
    family_tag: str,
    pilot_config: Optional[PilotConfig] = None,
    weight_choice: str = "y45",
    grid_size: int = 201,
) -> BandwidthPlan:
    """
    Estimates c in h(s) = c Y(s)^(-1/5) from

        c^5 = gamma_K / beta_K^2 * int w y^(-4/5) alpha ds / int w y^(-4/5) b^2 ds.

    Both integrals run over the pilot's interior [lo, hi]. With w = y^(4/5)
    the numerator is A(hi) - A(lo), read off the Nelson-Aalen path; with
    w = 1 it is the sum over failures in (lo, hi] of y_hat(x_i)^(-4/5) / Y(x_i).
    The denominator integrates squared pilot bias factors, less the
    pointwise variance of the pilot second derivative.
    """
    if family_tag not in PLUGIN_TAGS:
        raise ValueError(f"plug-in bandwidth supports tags {PLUGIN_TAGS}, got '{family_tag}'")
    if weight_choice not in WEIGHT_CHOICES:
        raise ValueError(f"weight choice must be one of {WEIGHT_CHOICES}, got '{weight_choice}'")
    pilot_config = pilot_config or PilotConfig()
    pilot = pilot_estimate(sample, pilot_config)

    # 1. Interior grid of the pilot
    half = 0.5 * pilot.h2
    lo, hi = half, sample.max_time - half
    if not hi > lo:
        raise PilotError(f"pilot bandwidth {pilot.h2:.4g} leaves no interior on [0, {sample.max_time:g}]")
    grid = np.linspace(lo, hi, grid_size)
    b_hat = pilot_bias_factor(pilot, family_tag, grid)
    ok = np.isfinite(b_hat)
    if ok.sum() < 2:
        raise PilotError("pilot bias factor undefined on the interior grid")
    grid, b_hat = grid[ok], b_hat[ok]
    lo, hi = float(grid[0]), float(grid[-1])
    n = sample.n
    y_hat = sample.at_risk(grid).astype(float) / n

    # 2. Numerator over the same interior
    if weight_choice == "y45":
        path = nelson_aalen(sample)
        numerator = float(path(hi) - path(lo))
        density = np.ones_like(grid)
    else:
        x = sample.failures_in(lo, hi)
        y_x = sample.at_risk(x).astype(float)
        numerator = float(np.sum((y_x / n) ** -0.8 / y_x))
        density = y_hat ** -0.8

    # 3. Denominator with roughness adjustment
    raw = float(integrate.trapezoid(density * b_hat ** 2, grid))
    adjustment = 0.0
    if settings.ROUGHNESS_ADJUSTMENT:
        noise = pilot.d2_variance(grid)
        adjustment = float(integrate.trapezoid(density * np.nan_to_num(noise), grid))
    denominator = raw - adjustment
    floored = False
    if denominator <= settings.DENOMINATOR_FLOOR:
        logger.warning(
            f"Plug-in denominator {denominator:.3e} (raw {raw:.3e}, adjustment {adjustment:.3e}) "
            f"floored at {settings.DENOMINATOR_FLOOR:g}"
        )
        denominator = settings.DENOMINATOR_FLOOR
        floored = True

    constants = kernel.constants
    c = (constants.gamma_k / constants.beta_k ** 2 * numerator / denominator) ** 0.2
    c_max = settings.C_MAX_FACTOR * sample.horizon * n ** 0.2
    capped = c > c_max
    if capped:
        logger.info(f"Plug-in constant {c:.4g} capped at {c_max:.4g}: the family fits the pilot closely")
        c = c_max

    metadata = {
        "family_tag": family_tag,
        "weight": weight_choice,
        "numerator": numerator,
        "denominator_raw": raw,
        "roughness_adjustment": adjustment,
        "adjustment_method": ADJUSTMENT_LABEL if settings.ROUGHNESS_ADJUSTMENT else "off",
        "denominator_floored": floored,
        "c_max": c_max,
        "capped": bool(capped),
        "pilot_h2": pilot.h2,
        "interior": [lo, hi],
    }
    logger.info(f"Plug-in constant c={c:.4g} for tag '{family_tag}' ({weight_choice} weight)")
    return BandwidthPlan.plugin(pilot=pilot_config, c=float(c), metadata=metadata)
