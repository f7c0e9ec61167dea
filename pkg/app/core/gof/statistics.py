# app/core/gof/statistics.py

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special

from app.config import settings
from app.core.errors import NoEventsError
from app.core.gof.path import DnPath
from app.core.parametric.families import HazardFamily
from app.utils.metrics import gof_tests_total

logger = logging.getLogger(__name__)

GOF_KINDS = ("ks_1p", "ks_const", "ks_multi", "cvm", "l1")
LEVELS = (0.10, 0.05)

# Upper quantiles of max|W0|, int W0^2 and int |W0| for a Brownian bridge W0
THRESHOLDS: Dict[Tuple[str, float], float] = {
    ("ks", 0.10): 1.225,
    ("ks", 0.05): 1.359,
    ("cvm", 0.10): 0.347,
    ("cvm", 0.05): 0.461,
    ("l1", 0.10): 0.499,
    ("l1", 0.05): 0.582,
}


@dataclass(frozen=True)
class GofDecision:
    statistic: float
    kind: str
    threshold: float
    level: float
    reject: bool

    def to_dict(self) -> Dict:
        return {
            "statistic": self.statistic,
            "kind": self.kind,
            "threshold": self.threshold,
            "level": self.level,
            "reject": self.reject,
        }


def _functional(kind: str) -> str:
    return "ks" if kind.startswith("ks") else kind


def threshold_for(kind: str, level: float) -> float:
    """Table value, unless THRESHOLD_OVERRIDES has '<kind>@<level>'."""
    if kind not in GOF_KINDS:
        raise ValueError(f"unknown statistic '{kind}' (known: {', '.join(GOF_KINDS)})")
    override = settings.THRESHOLD_OVERRIDES.get(f"{kind}@{level:g}")
    if override is not None:
        return float(override)
    for known in LEVELS:
        if abs(level - known) < 1e-12:
            return THRESHOLDS[(_functional(kind), known)]
    raise ValueError(f"no threshold for {kind} at level {level}; levels are 0.10 and 0.05 unless overridden")


def default_kind(family: HazardFamily) -> str:
    if family.name == "constant":
        return "ks_const"
    if family.localize(1.0).profile_capable:
        return "ks_multi"
    if family.dim == 1:
        return "ks_1p"
    return "cvm"


def gof_statistic(path: DnPath, kind: str, level: Optional[float] = None) -> GofDecision:
    """
    ks_1p     max|psi-weighted path| / {int Y psi^2 alpha_hat}^(1/2)
    ks_const  N[a,b]^(-1/2) max|path|, constant model
    ks_multi  N[a,b]^(-1/2) max|path|, product-form model
    cvm       sum over failures of path^2 / N[a,b]^2
    l1        sum over failures of |path| / N[a,b]^(3/2)
    """
    level = settings.GOF_LEVEL if level is None else float(level)
    threshold = threshold_for(kind, level)
    n_ab = path.n_ab
    if n_ab <= 0:
        raise NoEventsError(f"no failures in ({path.interval[0]:g}, {path.interval[1]:g}]")

    if kind == "ks_1p":
        if path.weighted_values is None:
            raise ValueError("ks_1p needs a one-parameter family")
        scale = np.sqrt(path.n * path.tau2_hat)
        statistic = float(np.max(np.abs(path.weighted_values)) / scale) if scale > 0 else 0.0
    elif kind == "ks_const":
        if path.family != "constant":
            raise ValueError(f"ks_const tests the constant model, path is for '{path.family}'")
        statistic = path.max_abs / np.sqrt(n_ab)
    elif kind == "ks_multi":
        if not path.product_form:
            raise ValueError(f"ks_multi needs a product-form family, path is for '{path.family}'")
        statistic = path.max_abs / np.sqrt(n_ab)
    elif kind == "cvm":
        statistic = float(np.sum(path.multiplicity * path.failure_values ** 2)) / n_ab ** 2
    else:
        statistic = float(np.sum(path.multiplicity * np.abs(path.failure_values))) / n_ab ** 1.5

    reject = bool(statistic >= threshold)
    gof_tests_total.labels(kind=kind, decision="reject" if reject else "accept").inc()
    return GofDecision(statistic=float(statistic), kind=kind, threshold=threshold, level=level, reject=reject)


# ============================================
# BROWNIAN BRIDGE CROSS-CHECK
# ============================================

def kolmogorov_tail(x: float) -> float:
    """P(max|W0| > x), closed form."""
    return float(special.kolmogorov(x))


def simulate_bridge_exceedance(
    threshold: float,
    functional: str = "ks",
    n_paths: int = 100_000,
    n_grid: int = 10_000,
    seed: int = 0,
    chunk: int = 500,
) -> float:
    """Monte Carlo P(F(W0) >= threshold) for F in {ks, cvm, l1} on a regular grid."""
    if functional not in ("ks", "cvm", "l1"):
        raise ValueError(f"functional must be ks, cvm or l1, got '{functional}'")
    rng = np.random.default_rng(seed)
    u = np.arange(1, n_grid + 1) / n_grid
    exceed = 0
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        walk = np.cumsum(rng.standard_normal((m, n_grid)), axis=1) / np.sqrt(n_grid)
        bridge = walk - u[None, :] * walk[:, -1:]
        if functional == "ks":
            values = np.max(np.abs(bridge), axis=1)
        elif functional == "cvm":
            values = np.mean(bridge ** 2, axis=1)
        else:
            values = np.mean(np.abs(bridge), axis=1)
        exceed += int(np.count_nonzero(values >= threshold))
        done += m
    rate = exceed / n_paths
    logger.info(f"Bridge exceedance of {functional} >= {threshold}: {rate:.4f} over {n_paths} paths")
    return rate
