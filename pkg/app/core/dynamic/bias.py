# app/core/dynamic/bias.py

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from app.core.parametric.families import HazardFamily

logger = logging.getLogger(__name__)

ValueOrFn = Union[float, Callable]

BIAS_TAGS = ("constant", "gompertz", "weibull", "frailty", "nelson_aalen", "generic", "product")


@dataclass(frozen=True)
class BiasFactor:
    s: float
    value: float
    family_tag: str


def _at(fn: Optional[ValueOrFn], s: float) -> float:
    if fn is None:
        raise ValueError("missing input for this bias formula")
    return float(fn(s)) if callable(fn) else float(fn)


def bias_factor(
    family_tag: str,
    alpha_fn: ValueOrFn,
    alpha_d1: ValueOrFn,
    alpha_d2: ValueOrFn,
    y_fn: Optional[ValueOrFn],
    y_d1: Optional[ValueOrFn],
    s: float,
    local_params: Optional[Sequence[float]] = None,
    family: Optional[HazardFamily] = None,
) -> BiasFactor:
    """
    b(s) in E alpha_hat(s) = alpha(s) + (1/2) beta_K h^2 b(s) for the named
    local family:

      constant      a'' + 2 a' y'/y
      gompertz      a'' - a'^2/a
      weibull       a'' - a'^2/a + a'/s
      frailty       a'' - 2 a'^2/a
      nelson_aalen  a''
      product       a'' - a0''  (a0 = family at local_params)
      generic       a'' - a0'' + 2 (a' - a0') (y'/y + psi0'/psi0), one parameter
    """
    tag = family_tag.lower()
    alpha = _at(alpha_fn, s)
    d1 = _at(alpha_d1, s)
    d2 = _at(alpha_d2, s)
    if not alpha > 0:
        raise ValueError(f"bias factor needs alpha(s) > 0, got {alpha} at s={s}")

    if tag == "constant":
        y = _at(y_fn, s)
        if not y > 0:
            raise ValueError(f"bias factor needs y(s) > 0 at s={s}")
        value = d2 + 2.0 * d1 * _at(y_d1, s) / y
    elif tag == "gompertz":
        value = d2 - d1 ** 2 / alpha
    elif tag == "weibull":
        if s <= 0:
            raise ValueError("the Weibull bias factor divides by s; s must be > 0")
        value = d2 - d1 ** 2 / alpha + d1 / s
    elif tag == "frailty":
        value = d2 - 2.0 * d1 ** 2 / alpha
    elif tag == "nelson_aalen":
        value = d2
    elif tag in ("product", "generic"):
        if family is None or local_params is None:
            raise ValueError(f"'{tag}' bias needs the local family and its least-false parameters")
        theta0 = np.asarray(local_params, dtype=float)
        at = np.array([float(s)])
        a0_d1 = float(family.hazard_dt(at, theta0, 1)[0])
        a0_d2 = float(family.hazard_dt(at, theta0, 2)[0])
        value = d2 - a0_d2
        if tag == "generic":
            if family.dim != 1:
                raise ValueError("the generic bias formula covers one-parameter families")
            y = _at(y_fn, s)
            if not y > 0:
                raise ValueError(f"bias factor needs y(s) > 0 at s={s}")
            step = 1e-5 * max(1.0, abs(s))
            psi = family.score(np.array([s - step, s, s + step]), theta0)[:, 0]
            psi_ratio = (psi[2] - psi[0]) / (2 * step) / psi[1]
            value += 2.0 * (d1 - a0_d1) * (_at(y_d1, s) / y + psi_ratio)
    else:
        raise ValueError(f"unknown bias tag '{family_tag}' (known: {', '.join(BIAS_TAGS)})")

    return BiasFactor(s=float(s), value=float(value), family_tag=tag)
