# app/core/dynamic/density.py

import logging

import numpy as np
import pandas as pd
from scipy import integrate

from app.core.dynamic.curve import HazardCurve
from app.core.parametric.families import HazardFamily

logger = logging.getLogger(__name__)

DENSITY_MODES = ("plug_in", "product_integral")

# Relative distance from 0 tolerated for the first grid point of a product integral
_ORIGIN_TOLERANCE = 1e-9


def density_estimates(curve: HazardCurve, family: HazardFamily, mode: str = "product_integral") -> np.ndarray:
    """
    Lifetime density on the curve's grid.

      plug_in           alpha(t, theta_hat(t)) exp{-A(t, theta_hat(t))}, A the
                        cumulative of the local model at t
      product_integral  exp{-int_0^t alpha_hat} alpha_hat(t), trapezoid over the grid

    Gaps give NaN; for product_integral every later point is NaN too.
    """
    grid = curve.grid
    alpha = curve.alpha_hat
    if mode == "plug_in":
        out = np.full(grid.size, np.nan)
        for i, point in enumerate(curve.points):
            if point.is_gap:
                continue
            try:
                local = family.localize(point.s)
                cumulative = float(local.cumulative(np.array([point.s]), point.theta_local)[0])
            except ValueError as e:
                logger.debug(f"No plug-in density at t={point.s:g}: {e}")
                continue
            out[i] = point.alpha_hat * np.exp(-cumulative)
        return out

    if mode != "product_integral":
        raise ValueError(f"density mode must be one of {', '.join(DENSITY_MODES)}, got '{mode}'")
    if grid.size == 0:
        return np.empty(0)
    span = max(abs(grid[-1]), 1.0)
    if abs(grid[0]) > _ORIGIN_TOLERANCE * span:
        raise ValueError(f"product-integral density needs a grid starting at 0, got {grid[0]:g}")
    cumulative = integrate.cumulative_trapezoid(alpha, grid, initial=0.0)
    return np.exp(-cumulative) * alpha


def density_frame(curve: HazardCurve, family: HazardFamily) -> pd.DataFrame:
    """Both estimates side by side; product_integral is NaN unless the grid starts at 0."""
    frame = pd.DataFrame({"s": curve.grid, "plug_in": density_estimates(curve, family, "plug_in")})
    try:
        frame["product_integral"] = density_estimates(curve, family, "product_integral")
    except ValueError:
        frame["product_integral"] = np.nan
    return frame
