# app/core/parametric/families.py

import logging
from abc import ABC, abstractmethod
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Keeps exp(C) finite when the optimizer probes extreme slopes
_EXP_CAP = 700.0


def _exp(x):
    return np.exp(np.minimum(x, _EXP_CAP))


class HazardFamily(ABC):
    """
    Parametric hazard alpha(t, theta) with score psi = d log alpha / d theta
    and hessian psi* = d psi / d theta. All methods are vectorized in t:
    hazard -> (m,), score -> (m, p), hessian -> (m, p, p).
    Parameter 0 is the level parameter.
    """

    name: str = "family"
    tag: str = "generic"
    param_names: Tuple[str, ...] = ()
    level_index: int = 0
    anchor: Optional[float] = None
    # level parameter enters as a pure factor: alpha = theta_0 * gamma(t, rest)
    level_factor: bool = False
    profile_capable: bool = False

    @property
    def dim(self) -> int:
        return len(self.param_names)

    # ---- bounds: (lower, inclusive) per parameter
    def lower_bounds(self) -> Tuple[Tuple[float, bool], ...]:
        return tuple((-np.inf, False) for _ in self.param_names)

    def is_feasible(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,) or not np.all(np.isfinite(theta)):
            return False
        for value, (low, inclusive) in zip(theta, self.lower_bounds()):
            if value < low or (value == low and not inclusive):
                return False
        return True

    @abstractmethod
    def hazard(self, t, theta) -> np.ndarray: ...

    @abstractmethod
    def score(self, t, theta) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, t, theta) -> np.ndarray: ...

    @abstractmethod
    def cumulative(self, t, theta) -> np.ndarray: ...

    def log_hazard(self, t, theta):
        return np.log(self.hazard(t, theta))

    def hazard_dt(self, t, theta, order: int = 1):
        """Time derivatives of alpha(t, theta); central differences unless overridden."""
        t = np.asarray(t, dtype=float)
        step = 1e-4 * np.maximum(1.0, np.abs(t))
        up, down = self.hazard(t + step, theta), self.hazard(t - step, theta)
        if order == 1:
            return (up - down) / (2 * step)
        return (up - 2 * self.hazard(t, theta) + down) / step ** 2

    def gamma(self, t, theta):
        """alpha / level; only meaningful when level_factor is set."""
        rest = np.array(theta, dtype=float)
        rest[self.level_index] = 1.0
        return self.hazard(t, rest)

    def auto_init(self, level: float) -> np.ndarray:
        theta = np.zeros(self.dim)
        theta[self.level_index] = level
        return theta

    def localize(self, s: float) -> "HazardFamily":
        """Local reparametrization around s whose level parameter equals alpha(s)."""
        return self

    def local_parameters(self, theta, s: float) -> np.ndarray:
        """theta in this family's parametrization -> parameters of localize(s)."""
        return np.array(theta, dtype=float)

    def describe(self) -> Dict:
        return {"family": self.name, "params": list(self.param_names), "anchor": self.anchor}

    def __repr__(self) -> str:
        where = f"@{self.anchor:g}" if self.anchor is not None else ""
        return f"{type(self).__name__}({self.name}{where})"


# ============================================
# CONSTANT
# ============================================

class ConstantHazard(HazardFamily):
    name = "constant"
    tag = "constant"
    param_names = ("theta",)
    level_factor = True

    def lower_bounds(self):
        return ((0.0, False),)

    def hazard(self, t, theta):
        return np.full(np.shape(t), float(theta[0]))

    def score(self, t, theta):
        return np.full(np.shape(t) + (1,), 1.0 / theta[0])

    def hessian(self, t, theta):
        return np.full(np.shape(t) + (1, 1), -1.0 / theta[0] ** 2)

    def cumulative(self, t, theta):
        return theta[0] * np.asarray(t, dtype=float)

    def hazard_dt(self, t, theta, order: int = 1):
        return np.zeros(np.shape(t))


# ============================================
# PRODUCT FORM  level * exp{C(t, beta) - C(anchor, beta)}
# ============================================

class Shape(ABC):
    """C(t, beta) with its beta- and t-derivatives and G(t, beta) = int_0^t e^C."""
    name: str = "shape"
    beta_lower: Tuple[float, bool] = (-np.inf, False)

    @abstractmethod
    def C(self, t, beta): ...

    @abstractmethod
    def C_beta(self, t, beta): ...

    @abstractmethod
    def C_beta2(self, t, beta): ...

    @abstractmethod
    def c(self, t, beta): ...

    @abstractmethod
    def c_t(self, t, beta): ...

    @abstractmethod
    def G(self, t, beta): ...

    def check_anchor(self, s: float) -> None:
        pass


class GompertzShape(Shape):
    name = "gompertz"

    def C(self, t, beta):
        return beta * np.asarray(t, dtype=float)

    def C_beta(self, t, beta):
        return np.asarray(t, dtype=float)

    def C_beta2(self, t, beta):
        return np.zeros(np.shape(t))

    def c(self, t, beta):
        return np.full(np.shape(t), float(beta))

    def c_t(self, t, beta):
        return np.zeros(np.shape(t))

    def G(self, t, beta):
        t = np.asarray(t, dtype=float)
        if abs(beta) * np.max(np.abs(t), initial=0.0) < 1e-10:
            return t * (1.0 + 0.5 * beta * t)
        return np.expm1(np.minimum(beta * t, _EXP_CAP)) / beta


class WeibullShape(Shape):
    """C = beta log t, i.e. alpha proportional to t^beta (beta = b - 1)."""
    name = "weibull"
    beta_lower = (-1.0, False)

    def C(self, t, beta):
        return beta * np.log(np.asarray(t, dtype=float))

    def C_beta(self, t, beta):
        return np.log(np.asarray(t, dtype=float))

    def C_beta2(self, t, beta):
        return np.zeros(np.shape(t))

    def c(self, t, beta):
        return beta / np.asarray(t, dtype=float)

    def c_t(self, t, beta):
        return -beta / np.asarray(t, dtype=float) ** 2

    def G(self, t, beta):
        return np.asarray(t, dtype=float) ** (beta + 1.0) / (beta + 1.0)

    def check_anchor(self, s: float) -> None:
        if s <= 0:
            raise ValueError("the Weibull local form needs an anchor s > 0")


class FrailtyShape(Shape):
    """C = -log(1 + beta t) with beta >= 0."""
    name = "frailty"
    beta_lower = (0.0, True)

    def C(self, t, beta):
        return -np.log1p(beta * np.asarray(t, dtype=float))

    def C_beta(self, t, beta):
        t = np.asarray(t, dtype=float)
        return -t / (1.0 + beta * t)

    def C_beta2(self, t, beta):
        t = np.asarray(t, dtype=float)
        return (t / (1.0 + beta * t)) ** 2

    def c(self, t, beta):
        return -beta / (1.0 + beta * np.asarray(t, dtype=float))

    def c_t(self, t, beta):
        return (beta / (1.0 + beta * np.asarray(t, dtype=float))) ** 2

    def G(self, t, beta):
        t = np.asarray(t, dtype=float)
        if beta == 0:
            return t.copy()
        return np.log1p(beta * t) / beta


class ProductHazard(HazardFamily):
    """
    alpha(t) = theta * exp{C(t, beta) - C(s, beta)} anchored at s, or
    a * exp{C(t, beta)} without an anchor. Gompertz a e^{beta t} and the
    frailty form a / (1 + beta t) are the unanchored members.
    """
    level_factor = True
    profile_capable = True

    def __init__(self, shape: Shape, anchor: Optional[float] = None):
        if anchor is not None:
            shape.check_anchor(anchor)
        self.shape = shape
        self.anchor = None if anchor is None else float(anchor)
        self.name = shape.name
        self.tag = shape.name
        self.param_names = ("theta", "beta") if anchor is not None else ("a", "beta")

    def lower_bounds(self):
        return ((0.0, False), self.shape.beta_lower)

    def _offset(self, beta, fn):
        if self.anchor is None:
            return 0.0
        return fn(np.asarray(self.anchor), beta)

    def hazard(self, t, theta):
        level, beta = theta[0], theta[1]
        return level * _exp(self.shape.C(t, beta) - self._offset(beta, self.shape.C))

    def score(self, t, theta):
        level, beta = theta[0], theta[1]
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,))
        out[..., 0] = 1.0 / level
        out[..., 1] = self.shape.C_beta(t, beta) - self._offset(beta, self.shape.C_beta)
        return out

    def hessian(self, t, theta):
        level, beta = theta[0], theta[1]
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2, 2))
        out[..., 0, 0] = -1.0 / level ** 2
        out[..., 1, 1] = self.shape.C_beta2(t, beta) - self._offset(beta, self.shape.C_beta2)
        return out

    def cumulative(self, t, theta):
        level, beta = theta[0], theta[1]
        return level * _exp(-self._offset(beta, self.shape.C)) * self.shape.G(t, beta)

    def hazard_dt(self, t, theta, order: int = 1):
        alpha = self.hazard(t, theta)
        c = self.shape.c(t, theta[1])
        if order == 1:
            return alpha * c
        return alpha * (c ** 2 + self.shape.c_t(t, theta[1]))

    def localize(self, s: float) -> "ProductHazard":
        return ProductHazard(self.shape, anchor=s)

    def local_parameters(self, theta, s: float) -> np.ndarray:
        return np.array([float(self.hazard(np.array([s]), theta)[0]), float(theta[1])])

    def to_unanchored(self, theta) -> np.ndarray:
        """(theta, beta) at anchor s -> (a, beta)."""
        if self.anchor is None:
            return np.asarray(theta, dtype=float)
        beta = theta[1]
        return np.array([theta[0] * _exp(-self.shape.C(self.anchor, beta)), beta])


# ============================================
# WEIBULL  a b t^(b-1)
# ============================================

class WeibullHazard(HazardFamily):
    name = "weibull"
    tag = "weibull"
    param_names = ("a", "b")
    level_factor = True

    def lower_bounds(self):
        return ((0.0, False), (0.0, False))

    def hazard(self, t, theta):
        a, b = theta
        return a * b * np.asarray(t, dtype=float) ** (b - 1.0)

    def score(self, t, theta):
        a, b = theta
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,))
        out[..., 0] = 1.0 / a
        out[..., 1] = 1.0 / b + np.log(t)
        return out

    def hessian(self, t, theta):
        a, b = theta
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2, 2))
        out[..., 0, 0] = -1.0 / a ** 2
        out[..., 1, 1] = -1.0 / b ** 2
        return out

    def cumulative(self, t, theta):
        a, b = theta
        return a * np.asarray(t, dtype=float) ** b

    def hazard_dt(self, t, theta, order: int = 1):
        a, b = theta
        t = np.asarray(t, dtype=float)
        if order == 1:
            return a * b * (b - 1.0) * t ** (b - 2.0)
        return a * b * (b - 1.0) * (b - 2.0) * t ** (b - 3.0)

    def auto_init(self, level: float) -> np.ndarray:
        return np.array([level, 1.0])

    def localize(self, s: float) -> ProductHazard:
        return ProductHazard(WeibullShape(), anchor=s)

    def local_parameters(self, theta, s: float) -> np.ndarray:
        return np.array([float(self.hazard(np.array([s]), theta)[0]), float(theta[1]) - 1.0])


# ============================================
# REGISTRY
# ============================================

FAMILY_NAMES = ("constant", "gompertz", "weibull", "frailty")


def get_family(name: str) -> HazardFamily:
    key = name.lower()
    if key == "constant":
        return ConstantHazard()
    if key == "gompertz":
        return ProductHazard(GompertzShape())
    if key == "weibull":
        return WeibullHazard()
    if key == "frailty":
        return ProductHazard(FrailtyShape())
    raise ValueError(f"unknown family '{name}' (known: {', '.join(FAMILY_NAMES)})")


def check_theta(family: HazardFamily, theta: Sequence[float]) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (family.dim,):
        raise ValueError(f"{family.name} expects {family.dim} parameters, got {theta.shape}")
    return theta
