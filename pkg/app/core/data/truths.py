# app/core/data/truths.py

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Type

import numpy as np


class TrueHazard:
    """A known hazard with analytic derivatives and cumulative, vectorized in s."""

    name = "truth"

    def __call__(self, s):
        raise NotImplementedError

    def d1(self, s):
        raise NotImplementedError

    def d2(self, s):
        raise NotImplementedError

    def cumulative(self, s):
        raise NotImplementedError

    def describe(self) -> Dict:
        return {"kind": self.name, "params": {k: v for k, v in vars(self).items()}}


@dataclass(frozen=True)
class ConstantTruth(TrueHazard):
    theta: float = 1.0
    name = "constant"

    def __call__(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.theta)

    def d1(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def d2(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def cumulative(self, s):
        return self.theta * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class GompertzTruth(TrueHazard):
    a: float = 1.0
    beta: float = 0.0
    name = "gompertz"

    def __call__(self, s):
        return self.a * np.exp(self.beta * np.asarray(s, dtype=float))

    def d1(self, s):
        return self.beta * self(s)

    def d2(self, s):
        return self.beta ** 2 * self(s)

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        if self.beta == 0:
            return self.a * s
        return self.a * np.expm1(self.beta * s) / self.beta


@dataclass(frozen=True)
class GompertzMakehamTruth(TrueHazard):
    """a + b exp(c s)"""
    a: float = 0.2
    b: float = 0.3
    c: float = 1.0
    name = "gompertz_makeham"

    def __call__(self, s):
        return self.a + self.b * np.exp(self.c * np.asarray(s, dtype=float))

    def d1(self, s):
        return self.b * self.c * np.exp(self.c * np.asarray(s, dtype=float))

    def d2(self, s):
        return self.b * self.c ** 2 * np.exp(self.c * np.asarray(s, dtype=float))

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        if self.c == 0:
            return (self.a + self.b) * s
        return self.a * s + self.b * np.expm1(self.c * s) / self.c


@dataclass(frozen=True)
class WeibullTruth(TrueHazard):
    """a b s^(b-1)"""
    a: float = 1.0
    b: float = 1.5
    name = "weibull"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * self.b * s ** (self.b - 1)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * self.b * (self.b - 1) * s ** (self.b - 2)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * self.b * (self.b - 1) * (self.b - 2) * s ** (self.b - 3)

    def cumulative(self, s):
        return self.a * np.asarray(s, dtype=float) ** self.b


@dataclass(frozen=True)
class FrailtyTruth(TrueHazard):
    """a / (1 + beta s)"""
    a: float = 1.0
    beta: float = 0.5
    name = "frailty"

    def __call__(self, s):
        return self.a / (1.0 + self.beta * np.asarray(s, dtype=float))

    def d1(self, s):
        u = 1.0 + self.beta * np.asarray(s, dtype=float)
        return -self.a * self.beta / u ** 2

    def d2(self, s):
        u = 1.0 + self.beta * np.asarray(s, dtype=float)
        return 2.0 * self.a * self.beta ** 2 / u ** 3

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        if self.beta == 0:
            return self.a * s
        return self.a * np.log1p(self.beta * s) / self.beta


@dataclass(frozen=True)
class QuadraticTruth(TrueHazard):
    """c0 + c2 s^2"""
    c0: float = 1.0
    c2: float = 1.0
    name = "quadratic"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.c0 + self.c2 * s ** 2

    def d1(self, s):
        return 2.0 * self.c2 * np.asarray(s, dtype=float)

    def d2(self, s):
        return np.full_like(np.asarray(s, dtype=float), 2.0 * self.c2)

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        return self.c0 * s + self.c2 * s ** 3 / 3.0


@dataclass(frozen=True)
class PiecewiseConstantTruth(TrueHazard):
    """Rate rates[k] on [breaks[k-1], breaks[k]); one more rate than breaks."""
    breaks: Tuple[float, ...] = (1.0,)
    rates: Tuple[float, ...] = (0.5, 2.0)
    name = "piecewise"

    def __post_init__(self):
        if len(self.rates) != len(self.breaks) + 1:
            raise ValueError("piecewise hazard needs len(rates) == len(breaks) + 1")
        if any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be increasing")

    def __call__(self, s):
        idx = np.searchsorted(np.asarray(self.breaks), np.asarray(s, dtype=float), side="right")
        return np.asarray(self.rates, dtype=float)[idx]

    def d1(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def d2(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def cumulative(self, s):
        s = np.asarray(s, dtype=float)
        edges = np.concatenate([[0.0], np.asarray(self.breaks, dtype=float)])
        rates = np.asarray(self.rates, dtype=float)
        widths = np.clip(s[..., None] - edges, 0.0, None)
        upper = np.concatenate([np.diff(edges), [np.inf]])
        return np.sum(np.minimum(widths, upper) * rates, axis=-1)

    def describe(self) -> Dict:
        return {"kind": self.name, "params": {"breaks": list(self.breaks), "rates": list(self.rates)}}


TRUTHS: Dict[str, Type[TrueHazard]] = {
    cls.name: cls
    for cls in (
        ConstantTruth,
        GompertzTruth,
        GompertzMakehamTruth,
        WeibullTruth,
        FrailtyTruth,
        QuadraticTruth,
        PiecewiseConstantTruth,
    )
}


def build_truth(kind: str, params: Dict) -> TrueHazard:
    if kind not in TRUTHS:
        raise ValueError(f"unknown hazard kind '{kind}' (known: {', '.join(sorted(TRUTHS))})")
    params = dict(params)
    if kind == "piecewise":
        params = {k: tuple(v) for k, v in params.items()}
    return TRUTHS[kind](**params)
