# app/schemas/reports.py

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


# ======================================================
# PROVENANCE (embedded in every output file)
# ======================================================
class Provenance(BaseModel):
    command: str
    config_file: Optional[Dict[str, Any]] = None
    flags: Dict[str, Any] = Field(default_factory=dict)
    resolved: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    versions: Dict[str, str] = Field(default_factory=dict)


# ======================================================
# FIT REPORT
# ======================================================
class FitReport(BaseModel):
    family: str
    interval: List[float]
    weight: str
    theta_hat: List[float]
    standard_errors: Optional[List[float]] = None
    covariance: Optional[List[List[float]]] = None
    converged: bool
    iterations: int
    score_residual: float
    log_likelihood: float
    n_events: int
    method: str
    warnings: List[str] = Field(default_factory=list)

    @classmethod
    def from_fit(cls, fit, matrices=None) -> "FitReport":
        return cls(
            family=fit.family,
            interval=[float(v) for v in fit.interval],
            weight=fit.weight_descr,
            theta_hat=[float(v) for v in fit.theta_hat],
            standard_errors=[float(v) for v in matrices.standard_errors()] if matrices is not None else None,
            covariance=matrices.covariance.tolist() if matrices is not None else None,
            converged=fit.converged,
            iterations=fit.iterations,
            score_residual=float(fit.score_residual),
            log_likelihood=float(fit.log_likelihood),
            n_events=fit.n_events,
            method=fit.method,
            warnings=list(fit.warnings),
        )


# ======================================================
# RESULT DOCUMENTS
# ======================================================
class RunReport(BaseModel):
    """JSON companion of a CSV result: provenance, a summary and the records."""
    provenance: Provenance
    summary: Dict[str, Any] = Field(default_factory=dict)
    records: List[Dict[str, Any]] = Field(default_factory=list)
    fits: List[FitReport] = Field(default_factory=list)


class ErrorRecord(BaseModel):
    error: str
    message: str
    violations: List[str] = Field(default_factory=list)
    exit_code: int
