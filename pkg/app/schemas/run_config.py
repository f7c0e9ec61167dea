# app/schemas/run_config.py

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.core.bandwidth.plan import BandwidthPlan
from app.core.bandwidth.plugin import WEIGHT_CHOICES
from app.core.bench.experiment import EstimatorConfig, Experiment
from app.core.data.simulation import SimulationLaw
from app.core.data.truths import build_truth
from app.core.dynamic.estimator import SE_MODES, STARTUP_POLICIES
from app.core.errors import ConfigError, HazardError
from app.core.gof.statistics import GOF_KINDS
from app.core.parametric.families import get_family
from app.core.smoothing.kernels import get_kernel

COMMANDS = ("estimate", "gof-scan", "simulate", "compare", "bandwidth")
ACCEPTED_LEVELS = (0.10, 0.05)


# ======================================================
# SIMULATION LAWS
# ======================================================
class HazardSpec(BaseModel):
    kind: str
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self):
        return build_truth(self.kind, self.params)


class LawSpec(BaseModel):
    """Named event hazard, optional censoring hazard, horizon and seed."""
    hazard: HazardSpec
    censoring: Optional[HazardSpec] = None
    horizon: float = Field(gt=0)
    seed: int = Field(default=0, ge=0)

    def to_law(self):
        return SimulationLaw(
            true_hazard=self.hazard.build(),
            censoring_hazard=self.censoring.build() if self.censoring is not None else None,
            horizon=self.horizon,
            seed=self.seed,
        )


# ======================================================
# EXPERIMENTS
# ======================================================
class EstimatorSpec(BaseModel):
    label: str
    kind: Literal["dynamic", "smoothed_na", "parametric"] = "dynamic"
    family: str = "constant"
    kernel: str = settings.DEFAULT_KERNEL
    bandwidth: str = "fixed:0.5"
    startup: str = "none"
    min_events: int = settings.MIN_EVENTS
    slope_window_factor: float = 1.0
    slope_smooth_span: float = 0.0

    def to_config(self):
        return EstimatorConfig(**self.model_dump())


class ExperimentSpec(BaseModel):
    name: str = "experiment"
    law: LawSpec
    n: int = Field(ge=1)
    replications: int = Field(ge=1)
    estimators: List[EstimatorSpec] = Field(min_length=1)
    grid: Optional[List[float]] = None
    grid_count: int = Field(default=31, ge=1)
    seed: int = Field(default=0, ge=0)

    def grid_points(self) -> List[float]:
        if self.grid is not None:
            return [float(s) for s in self.grid]
        return [float(s) for s in np.linspace(0.0, self.law.horizon, self.grid_count)]

    def to_experiment(self):
        return Experiment(
            law=self.law.to_law(),
            n=self.n,
            replications=self.replications,
            estimators=tuple(e.to_config() for e in self.estimators),
            grid=tuple(self.grid_points()),
            seed=self.seed,
            name=self.name,
        )


# ======================================================
# CLI RUN CONFIG
# ======================================================
class RunConfig(BaseModel):
    """
    One CLI invocation after merging --config with explicit flags.
    Structural typing is left to pydantic; everything a run needs beyond
    that is reported by violations(), all at once.
    """
    command: Literal["estimate", "gof-scan", "simulate", "compare", "bandwidth"]
    input: Optional[str] = None
    time_column: str = "time"
    status_column: str = "status"
    law: Optional[LawSpec] = None
    n: Optional[int] = None
    experiment: Optional[ExperimentSpec] = None
    family: str = "constant"
    kernel: str = settings.DEFAULT_KERNEL
    bandwidth: str = "gof"
    grid: Optional[List[float]] = None
    grid_count: int = 50
    output: Optional[str] = None
    seed: int = 0
    level: float = settings.GOF_LEVEL
    kind: Optional[str] = None
    min_events: int = settings.MIN_EVENTS
    startup: str = "gof"
    se_mode: str = "formula"
    band_level: float = 0.95
    bias_correction: bool = False
    slope_window_factor: float = 1.0
    slope_smooth_span: float = 0.0
    pilot_h2: Optional[float] = None
    weight_choice: str = "y45"
    replications: Optional[int] = None
    threads: int = settings.THREADS

    def violations(self) -> List[str]:
        found: List[str] = []

        # 1. Inputs per command
        if self.command in ("estimate", "gof-scan", "bandwidth"):
            if (self.input is None) == (self.law is None):
                found.append(f"{self.command} needs exactly one of --input or --law")
            if self.law is not None and (self.n is None or self.n < 1):
                found.append("--law needs a sample size --n >= 1")
            if self.input is not None and not Path(self.input).is_file():
                found.append(f"input file not found: {self.input}")
            if self.time_column == self.status_column:
                found.append(f"time and status columns must differ, both are '{self.time_column}'")
        elif self.experiment is None:
            if self.command == "compare" or self.law is None or self.n is None:
                found.append(f"{self.command} needs an experiment (--config with an 'experiment' block)")

        # 2. Model choices
        try:
            get_family(self.family)
        except ValueError as e:
            found.append(str(e))
        try:
            get_kernel(self.kernel)
        except HazardError as e:
            found.append(str(e))
        if self.command in ("estimate", "bandwidth"):
            try:
                BandwidthPlan.parse(self.bandwidth)
            except ConfigError as e:
                found.extend(e.violations)
        if not any(abs(self.level - lv) < 1e-12 for lv in ACCEPTED_LEVELS):
            found.append(f"level must be 0.10 or 0.05, got {self.level:g}")
        if self.kind is not None and self.kind not in GOF_KINDS:
            found.append(f"unknown statistic '{self.kind}' (known: {', '.join(GOF_KINDS)})")
        if self.startup not in STARTUP_POLICIES:
            found.append(f"startup must be one of {', '.join(STARTUP_POLICIES)}")
        if self.se_mode not in SE_MODES:
            found.append(f"se_mode must be one of {', '.join(SE_MODES)}")
        if self.weight_choice not in WEIGHT_CHOICES:
            found.append(f"weight choice must be one of {', '.join(WEIGHT_CHOICES)}")
        if self.pilot_h2 is not None and not self.pilot_h2 > 0:
            found.append("pilot bandwidth must be positive")

        # 3. Numbers
        if self.min_events < 1:
            found.append("min_events must be >= 1")
        if self.threads < 1:
            found.append("threads must be >= 1")
        if not 0.0 < self.band_level < 1.0:
            found.append("band level must lie in (0, 1)")
        if self.grid is not None and (not self.grid or any(s < 0 for s in self.grid)):
            found.append("grid must be a nonempty list of times >= 0")
        if self.grid is None and self.grid_count < 1:
            found.append("grid count must be >= 1")
        if self.replications is not None and self.replications < 1:
            found.append("replications must be >= 1")
        if self.seed < 0:
            found.append("seed must be >= 0")

        # 4. Output
        if not self.output:
            found.append("--output is required")
        else:
            parent = Path(self.output).resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                found.append(f"output directory is not writable: {parent}")
        return found

    def grid_points(self, horizon: float) -> List[float]:
        if self.grid is not None:
            return sorted(float(s) for s in self.grid)
        return [float(s) for s in np.linspace(0.0, horizon, self.grid_count)]
