# app/core/smoothing/kernels.py

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from app.core.errors import KernelError

logger = logging.getLogger(__name__)

# Support is [-1/2, 1/2] throughout; for a kernel L on [-1, 1] the
# equivalent here is K(u) = 2 L(2u), so beta_K = beta_L / 4, gamma_K = 2 gamma_L.
HALF_WIDTH = 0.5


@dataclass(frozen=True)
class KernelConstants:
    beta_k: float
    gamma_k: float
    delta_k: float

    def __post_init__(self):
        if min(self.beta_k, self.gamma_k, self.delta_k) <= 0:
            raise KernelError("kernel constants must be positive")
        if self.beta_k > 0.25:
            raise KernelError(f"beta_K={self.beta_k} exceeds the support bound 1/4")

    @property
    def efficiency(self) -> float:
        """beta_K * gamma_K^2, the kernel-dependent factor of the optimal MSE."""
        return self.beta_k * self.gamma_k ** 2


BUILTIN_COEFFICIENTS: Dict[str, Tuple[float, ...]] = {
    "uniform": (1.0,),
    "epanechnikov": (1.5, 0.0, -6.0),
    "biweight": (15 / 8, 0.0, -15.0, 0.0, 30.0),
    "triweight": (35 / 16, 0.0, -105 / 4, 0.0, 105.0, 0.0, -140.0),
}

CLOSED_FORM_CONSTANTS: Dict[str, KernelConstants] = {
    "uniform": KernelConstants(1 / 12, 1.0, 1 / 12),
    "epanechnikov": KernelConstants(0.05, 1.2, 3 / 70),
    "biweight": KernelConstants(1 / 28, 10 / 7, 5 / 154),
    "triweight": KernelConstants(1 / 36, 700 / 429, 35 / 1287),
}


@dataclass(frozen=True)
class Kernel:
    """
    Symmetric polynomial kernel on [-1/2, 1/2], zero outside.
    `coefficients` are ascending powers of u.
    """
    name: str
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.coefficients != BUILTIN_COEFFICIENTS.get(self.name):
            validate_kernel(self)

    @cached_property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    @cached_property
    def _d1(self) -> Polynomial:
        return self.poly.deriv(1)

    @cached_property
    def _d2(self) -> Polynomial:
        return self.poly.deriv(2)

    @cached_property
    def _antiderivative(self) -> Polynomial:
        return self.poly.integ()

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= HALF_WIDTH, self.poly(u), 0.0)

    __call__ = evaluate

    def derivative(self, u, order: int = 1):
        """Analytic K'(u) or K''(u); zero outside the support."""
        if order not in (1, 2):
            raise ValueError("only first and second kernel derivatives are provided")
        u = np.asarray(u, dtype=float)
        poly = self._d1 if order == 1 else self._d2
        return np.where(np.abs(u) <= HALF_WIDTH, poly(u), 0.0)

    def integral(self, lo, hi):
        """int_lo^hi K(u) du, exact."""
        lo = np.clip(np.asarray(lo, dtype=float), -HALF_WIDTH, HALF_WIDTH)
        hi = np.clip(np.asarray(hi, dtype=float), -HALF_WIDTH, HALF_WIDTH)
        return self._antiderivative(hi) - self._antiderivative(lo)

    @cached_property
    def constants(self) -> KernelConstants:
        if self.name in CLOSED_FORM_CONSTANTS and self.coefficients == BUILTIN_COEFFICIENTS[self.name]:
            return CLOSED_FORM_CONSTANTS[self.name]
        return constants_by_quadrature(self)

    def weight(self, s: float, h: float) -> "KernelWeight":
        return KernelWeight(self, float(s), float(h))


@dataclass(frozen=True)
class KernelWeight:
    """t -> K((t - s)/h); polynomial on its support, used as a likelihood weight."""
    kernel: Kernel
    s: float
    h: float

    def __call__(self, t):
        return self.kernel.evaluate((np.asarray(t, dtype=float) - self.s) / self.h)

    @property
    def polynomial_degree(self) -> int:
        return self.kernel.degree

    @property
    def breakpoints(self) -> Tuple[float, float]:
        return (self.s - HALF_WIDTH * self.h, self.s + HALF_WIDTH * self.h)

    def __str__(self) -> str:
        return f"{self.kernel.name}((t-{self.s:g})/{self.h:g})"


# ==========================================
# Construction and validation
# ==========================================

def _quad(fn) -> float:
    value, _ = integrate.quad(fn, -HALF_WIDTH, HALF_WIDTH, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


def constants_by_quadrature(kernel: Kernel) -> KernelConstants:
    return KernelConstants(
        beta_k=_quad(lambda u: u * u * float(kernel.evaluate(u))),
        gamma_k=_quad(lambda u: float(kernel.evaluate(u)) ** 2),
        delta_k=_quad(lambda u: u * u * float(kernel.evaluate(u)) ** 2),
    )


def validate_kernel(kernel: Kernel) -> None:
    """Symmetry, nonnegativity and unit mass; raises KernelError."""
    grid = np.linspace(-HALF_WIDTH, HALF_WIDTH, 1001)
    values = kernel.evaluate(grid)
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.max(np.abs(values - values[::-1])) > 1e-12 * scale:
        raise KernelError(f"kernel '{kernel.name}' is not symmetric")
    if np.min(values) < -1e-12 * scale:
        raise KernelError(f"kernel '{kernel.name}' takes negative values")
    mass = _quad(lambda u: float(kernel.evaluate(u)))
    if abs(mass - 1.0) > 1e-10:
        raise KernelError(f"kernel '{kernel.name}' integrates to {mass:.12f}, not 1")


def get_kernel(name: str) -> Kernel:
    key = name.lower()
    if key not in BUILTIN_COEFFICIENTS:
        raise KernelError(f"unknown kernel '{name}' (known: {', '.join(sorted(BUILTIN_COEFFICIENTS))}, custom)")
    return Kernel(key, BUILTIN_COEFFICIENTS[key])


def custom_kernel(coefficients: Sequence[float], name: str = "custom") -> Kernel:
    kernel = Kernel(name, tuple(coefficients))
    logger.info(f"Custom kernel '{name}' accepted: constants {kernel.constants}")
    return kernel


PILOT_KERNEL_NAME = "triweight"
