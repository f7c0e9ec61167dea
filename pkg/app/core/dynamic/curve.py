# app/core/dynamic/curve.py

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

GAP_FLAGS = ("insufficient_window", "empty_window", "nonconverged", "no_risk")
ANNOTATION_FLAGS = ("startup", "shutdown", "global")


@dataclass
class CurvePoint:
    """
    One grid point of a dynamic hazard curve.

    `theta_local` is always in the local parametrization at s, so its first
    entry equals alpha_hat. Gap points carry NaN values and a gap flag;
    boundary points carry an annotation flag and real values.
    """
    s: float
    alpha_hat: float
    h_used: float
    theta_local: np.ndarray
    se: float
    band_lo: float = float("nan")
    band_hi: float = float("nan")
    flag: str = ""
    converged: bool = True
    n_events: int = 0
    score_residual: float = float("nan")
    bias_factor: Optional[float] = None

    @property
    def is_gap(self) -> bool:
        return self.flag in GAP_FLAGS

    @classmethod
    def gap(cls, s: float, h: float, dim: int, flag: str, n_events: int = 0) -> "CurvePoint":
        return cls(
            s=float(s),
            alpha_hat=float("nan"),
            h_used=float(h),
            theta_local=np.full(dim, np.nan),
            se=float("nan"),
            flag=flag,
            converged=False,
            n_events=n_events,
        )


@dataclass
class HazardCurve:
    points: List[CurvePoint]
    family: str
    kernel: str
    param_names: Tuple[str, ...]
    plan: Dict = field(default_factory=dict)
    startup_boundary: Optional[float] = None
    shutdown_boundary: Optional[float] = None
    metadata: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def grid(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def alpha_hat(self) -> np.ndarray:
        return np.array([p.alpha_hat for p in self.points])

    @property
    def h_used(self) -> np.ndarray:
        return np.array([p.h_used for p in self.points])

    @property
    def se(self) -> np.ndarray:
        return np.array([p.se for p in self.points])

    @property
    def theta_local(self) -> np.ndarray:
        return np.vstack([p.theta_local for p in self.points]) if self.points else np.empty((0, 0))

    @property
    def flags(self) -> List[str]:
        return [p.flag for p in self.points]

    def gaps(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for p in self.points:
            if p.is_gap:
                counts[p.flag] = counts.get(p.flag, 0) + 1
        return counts

    def point_at(self, s: float) -> CurvePoint:
        idx = int(np.argmin(np.abs(self.grid - s)))
        return self.points[idx]

    def to_frame(self) -> pd.DataFrame:
        """Columns s, alpha_hat, h_used, se, band_lo, band_hi, theta_1..theta_p, flag."""
        frame = pd.DataFrame({
            "s": self.grid,
            "alpha_hat": self.alpha_hat,
            "h_used": self.h_used,
            "se": self.se,
            "band_lo": [p.band_lo for p in self.points],
            "band_hi": [p.band_hi for p in self.points],
        })
        theta = self.theta_local
        for j in range(len(self.param_names)):
            frame[f"theta_{j + 1}"] = theta[:, j] if len(self.points) else []
        frame["flag"] = self.flags
        return frame

    def describe(self) -> Dict:
        return {
            "family": self.family,
            "kernel": self.kernel,
            "param_names": list(self.param_names),
            "plan": self.plan,
            "startup_boundary": self.startup_boundary,
            "shutdown_boundary": self.shutdown_boundary,
            "points": len(self.points),
            "gaps": self.gaps(),
            **self.metadata,
        }


def sorted_points(points: Sequence[CurvePoint]) -> List[CurvePoint]:
    return sorted(points, key=lambda p: p.s)
