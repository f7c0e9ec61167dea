# app/core/data/ingest.py

import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from app.core.data.quality_gate import SampleQualityGate
from app.core.data.sample import SurvivalSample
from app.core.errors import DataValidationError
from app.utils.logging import log_with_context

logger = logging.getLogger(__name__)


@log_with_context(component="ingest")
def ingest_csv(
    path: Union[str, Path],
    time_column: str = "time",
    status_column: str = "status",
    horizon: Optional[float] = None,
) -> SurvivalSample:
    """
    Reads a headed CSV of (time, status) rows into a sorted sample.
    The horizon defaults to the largest time. The input file is never modified.
    """
    path = Path(path)
    if not path.is_file():
        raise DataValidationError([f"input file not found: {path}"])

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise DataValidationError(["empty file"])
    except pd.errors.ParserError as exc:
        raise DataValidationError([f"malformed csv: {exc}"])

    gate = SampleQualityGate(time_column, status_column)
    is_valid, violations = gate.validate_frame(frame, horizon=horizon)
    if not is_valid:
        raise DataValidationError(violations)

    sample = SurvivalSample.from_records(
        pd.to_numeric(frame[time_column]).to_numpy(dtype=float),
        pd.to_numeric(frame[status_column]).to_numpy(dtype=int),
        horizon=horizon,
    )
    logger.info(f"Ingested {sample.n} observations ({sample.n_failures} failures) from {path.name}")
    return sample
