# app/core/bandwidth/post_smooth.py

import numpy as np


def post_smooth(s, values, span: float) -> np.ndarray:
    """
    Running mean of `values` over |s_j - s_i| <= span/2, NaN-aware.

    Windows are clipped to the grid, so they turn one-sided at the ends.
    NaN inputs stay NaN. A span below the grid spacing returns the input.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.shape != v.shape or s.ndim != 1:
        raise ValueError("post_smooth needs 1-d s and values of equal length")
    if np.any(np.diff(s) < 0):
        raise ValueError("post_smooth needs s sorted ascending")
    if s.size < 3 or not span > 0:
        return v.copy()

    finite = np.isfinite(v)
    sums = np.concatenate([[0.0], np.cumsum(np.where(finite, v, 0.0))])
    counts = np.concatenate([[0], np.cumsum(finite)])
    lo = np.searchsorted(s, s - 0.5 * span, side="left")
    hi = np.searchsorted(s, s + 0.5 * span, side="right")
    n = counts[hi] - counts[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (sums[hi] - sums[lo]) / n
    out[~finite] = np.nan
    return out
