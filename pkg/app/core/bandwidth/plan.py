# app/core/bandwidth/plan.py

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.errors import ConfigError, UnboundedBandwidthError
from app.core.smoothing.kernels import KernelConstants, PILOT_KERNEL_NAME

logger = logging.getLogger(__name__)

PLAN_KINDS = ("fixed", "adaptive", "plugin", "gof")


@dataclass(frozen=True)
class PilotConfig:
    """Pilot smoother: twice differentiable kernel K2 and a somewhat large h2."""
    kernel: str = PILOT_KERNEL_NAME
    h2: Optional[float] = None

    def __post_init__(self):
        if self.h2 is not None and not self.h2 > 0:
            raise ValueError(f"pilot bandwidth must be positive, got {self.h2}")

    def to_dict(self) -> Dict:
        return {"kernel": self.kernel, "h2": self.h2}


@dataclass(frozen=True)
class BandwidthPlan:
    """
    How each grid point gets its window width:
      fixed     h
      adaptive  h(s) = c * Y(s)^(-1/5)
      plugin    adaptive with c estimated from a pilot (c None until resolved)
      gof       h_hat(s) from window expansion, then post-smoothed
    """
    kind: str
    h_fixed: Optional[float] = None
    c: Optional[float] = None
    pilot: Optional[PilotConfig] = None
    metadata: Dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ok, violations = self.validate()
        if not ok:
            raise ConfigError(violations)

    def validate(self) -> Tuple[bool, list]:
        violations = []
        if self.kind not in PLAN_KINDS:
            return False, [f"unknown bandwidth kind '{self.kind}' (known: {', '.join(PLAN_KINDS)})"]
        if self.kind == "fixed":
            if self.h_fixed is None or not self.h_fixed > 0:
                violations.append("bandwidth must be positive (fixed h)")
            if self.c is not None or self.pilot is not None:
                violations.append("fixed bandwidth takes only h")
        elif self.kind == "adaptive":
            if self.c is None or not self.c > 0:
                violations.append("bandwidth must be positive (adaptive c)")
            if self.h_fixed is not None or self.pilot is not None:
                violations.append("adaptive bandwidth takes only c")
        elif self.kind == "plugin":
            if self.pilot is None:
                violations.append("plugin bandwidth needs a pilot configuration")
            if self.c is not None and not self.c > 0:
                violations.append("bandwidth must be positive (plugin c)")
            if self.h_fixed is not None:
                violations.append("plugin bandwidth takes no fixed h")
        elif self.h_fixed is not None or self.c is not None or self.pilot is not None:
            violations.append("gof bandwidth takes no h, c or pilot")
        return len(violations) == 0, violations

    # ---- constructors
    @classmethod
    def fixed(cls, h: float) -> "BandwidthPlan":
        return cls(kind="fixed", h_fixed=float(h))

    @classmethod
    def adaptive(cls, c: float) -> "BandwidthPlan":
        return cls(kind="adaptive", c=float(c))

    @classmethod
    def plugin(cls, pilot: Optional[PilotConfig] = None, c: Optional[float] = None,
               metadata: Optional[Dict] = None) -> "BandwidthPlan":
        return cls(kind="plugin", c=c, pilot=pilot or PilotConfig(), metadata=dict(metadata or {}))

    @classmethod
    def gof(cls) -> "BandwidthPlan":
        return cls(kind="gof")

    @classmethod
    def parse(cls, text: str) -> "BandwidthPlan":
        """'fixed:<h>' | 'adaptive:<c>' | 'plugin' | 'gof'"""
        kind, _, value = text.strip().partition(":")
        kind = kind.lower()
        try:
            if kind == "fixed":
                return cls.fixed(float(value))
            if kind == "adaptive":
                return cls.adaptive(float(value))
        except ValueError:
            raise ConfigError([f"bandwidth '{text}': '{value}' is not a number"])
        if kind == "plugin" and not value:
            return cls.plugin()
        if kind == "gof" and not value:
            return cls.gof()
        raise ConfigError([f"bandwidth '{text}' must be fixed:<h>, adaptive:<c>, plugin or gof"])

    # ---- evaluation
    @property
    def is_resolved(self) -> bool:
        return self.kind in ("fixed", "adaptive") or (self.kind == "plugin" and self.c is not None)

    def h_at(self, at_risk) -> np.ndarray:
        """Window widths for at-risk counts Y(s); inf where Y(s) = 0."""
        y = np.asarray(at_risk, dtype=float)
        if self.kind == "fixed":
            return np.full(y.shape, self.h_fixed)
        if not self.is_resolved:
            raise ValueError(f"{self.kind} bandwidth must be resolved before use")
        with np.errstate(divide="ignore"):
            return self.c * np.where(y > 0, y, 0.0) ** (-0.2)

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.h_fixed:g}"
        if self.kind in ("adaptive", "plugin") and self.c is not None:
            return f"{self.kind}:{self.c:g}"
        return self.kind

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "h_fixed": self.h_fixed,
            "c": self.c,
            "pilot": self.pilot.to_dict() if self.pilot else None,
            "metadata": dict(self.metadata),
        }


def optimal_h_local(
    alpha_s: float,
    b_s: float,
    y_s: float,
    n: int,
    kernel_constants: KernelConstants,
) -> Tuple[float, float]:
    """
    MSE-optimal local width and the MSE it attains:
      h0 = {gamma_K / beta_K^2 * alpha / b^2}^(1/5) (n y)^(-1/5)
      mse = 5/4 (beta_K gamma_K^2)^(2/5) alpha^(4/5) |b|^(2/5) (n y)^(-4/5)
    """
    if not alpha_s > 0 or not y_s > 0 or n < 1:
        raise ValueError(f"optimal_h_local needs alpha > 0, y > 0, n >= 1 (got {alpha_s}, {y_s}, {n})")
    if b_s == 0:
        raise UnboundedBandwidthError()
    beta_k, gamma_k = kernel_constants.beta_k, kernel_constants.gamma_k
    ny = n * y_s
    h0 = (gamma_k / beta_k ** 2 * alpha_s / b_s ** 2) ** 0.2 * ny ** -0.2
    mse = 1.25 * (beta_k * gamma_k ** 2) ** 0.4 * alpha_s ** 0.8 * abs(b_s) ** 0.4 * ny ** -0.8
    return float(h0), float(mse)
