# app/config.py

from typing import Dict
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # ==== Project Info ====
    PROJECT_NAME: str = "DynHazard"
    VERSION: str = "1.0.0"

    # ==== Logging & Metrics ====
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_TO_FILE: bool = False
    METRICS_ENABLED: bool = True

    # ==== Local Fitting ====
    DEFAULT_KERNEL: str = "epanechnikov"
    MIN_EVENTS: int = 10
    FIT_TOLERANCE: float = 1e-8
    FIT_MAX_ITERATIONS: int = 100
    # Gauss-Legendre nodes per between-order-statistic segment
    QUADRATURE_NODES: int = 16

    # ==== Simulation ====
    SIMULATION_TOLERANCE: float = 1e-10

    # ==== Goodness of Fit & Windows ====
    GOF_LEVEL: float = 0.10
    GOF_H_GRID_RATIO: float = 1.15
    STARTUP_GRID_RATIO: float = 1.05
    STARTUP_SHRINK: float = 0.9
    GOF_SMOOTH_SPAN_FRACTION: float = 0.1
    # "kind@level" -> threshold, e.g. {"ks_const@0.1": 1.30}
    THRESHOLD_OVERRIDES: Dict[str, float] = {}

    # ==== Plug-in Bandwidth ====
    PILOT_MIN_FAILURES: int = 30
    PILOT_BANDWIDTH_FACTOR: float = 2.0
    ROUGHNESS_ADJUSTMENT: bool = True
    C_MAX_FACTOR: float = 1.0
    DENOMINATOR_FLOOR: float = 1e-12

    # ==== Execution ====
    THREADS: int = 1

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"

    def model_post_init(self, __context):
        if not 0.0 < self.STARTUP_SHRINK < 1.0:
            raise ValueError(f"STARTUP_SHRINK must lie in (0, 1), got {self.STARTUP_SHRINK}")
        if self.GOF_H_GRID_RATIO <= 1.0 or self.STARTUP_GRID_RATIO <= 1.0:
            raise ValueError("Window grid ratios must exceed 1")
        if self.FIT_TOLERANCE <= 0 or self.SIMULATION_TOLERANCE <= 0:
            raise ValueError("Tolerances must be positive")
        if self.MIN_EVENTS < 1 or self.THREADS < 1 or self.QUADRATURE_NODES < 2:
            raise ValueError("MIN_EVENTS and THREADS must be >= 1, QUADRATURE_NODES >= 2")


settings = Settings()
